#include "uavheal/channel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "uavheal/errors.hpp"

namespace uavheal {

namespace {

constexpr double kBesselSwitch = 15.0;

double path_loss_dB(const ChannelParams& p, double distance_m) {
  return 10.0 * p.path_loss_exponent *
         std::log10(4.0 * std::numbers::pi * distance_m * p.carrier_freq_Hz / p.light_speed_m_s);
}

void require_distance(double distance_m) {
  if (!(distance_m > 0.0) || !std::isfinite(distance_m))
    throw Error(ErrorCode::Domain, "link distance must be positive and finite");
}

}  // namespace

ChannelParams ChannelParams::physical() {
  ChannelParams p;
  p.clec_distance_override_m.reset();
  return p;
}

void ChannelParams::validate() const {
  if (!(transmit_power_dBm > receive_threshold_dBm))
    throw Error(ErrorCode::Domain, "transmit power must exceed the receive threshold");
  if (!(path_loss_exponent > 0.0)) throw Error(ErrorCode::Domain, "path loss exponent must be > 0");
  if (!(scatter_strength > 0.0)) throw Error(ErrorCode::Domain, "scatter strength must be > 0");
  if (!(rice_factor >= 0.0)) throw Error(ErrorCode::Domain, "rice factor must be >= 0");
  if (!(carrier_freq_Hz > 0.0)) throw Error(ErrorCode::Domain, "carrier frequency must be > 0");
  if (!(light_speed_m_s > 0.0)) throw Error(ErrorCode::Domain, "light speed must be > 0");
  if (clec_distance_override_m && !(*clec_distance_override_m > 0.0))
    throw Error(ErrorCode::Domain, "distance override must be > 0");
}

double log_bessel_i0(double x) {
  if (!std::isfinite(x) || x < 0.0)
    throw Error(ErrorCode::Domain, "log_bessel_i0 needs a finite nonnegative argument");
  if (x < kBesselSwitch) {
    // sum_m (x^2/4)^m / (m!)^2
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m < 500; ++m) {
      term *= q / (static_cast<double>(m) * m);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::log(sum);
  }
  // I0(x) ~ e^x / sqrt(2 pi x) * sum_k ((2k-1)!!)^2 / (k! (8x)^k)
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * odd * odd / (k * 8.0 * x);
    if (next > term) break;  // asymptotic series started to diverge
    term = next;
    sum += term;
    if (term < 1e-17) break;
  }
  return x - 0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

double log_rice_term(const ChannelParams& p, double distance_m) {
  require_distance(distance_m);
  const double s2 = p.scatter_strength;
  const double rho2 = p.dominant_strength_sq();
  return std::log(distance_m / s2) + (-distance_m * distance_m - rho2) / (2.0 * s2) +
         log_bessel_i0(2.0 * p.rice_factor * distance_m);
}

double received_power_dBm(const ChannelParams& p, double distance_m) {
  require_distance(distance_m);
  double power = p.transmit_power_dBm + p.antenna_gain_rx_dBi + p.antenna_gain_tx_dBi -
                 path_loss_dB(p, distance_m);
  if (p.small_scale_enabled) power -= std::exp(log_rice_term(p, distance_m));
  return power;
}

bool clec_satisfied(const ChannelParams& p, double distance_m) {
  require_distance(distance_m);
  if (p.clec_distance_override_m) return distance_m <= *p.clec_distance_override_m;
  const double slack = p.link_budget_dB() - path_loss_dB(p, distance_m);
  if (!p.small_scale_enabled) return slack >= 0.0;
  if (slack <= 0.0) return false;
  return log_rice_term(p, distance_m) <= std::log(slack);
}

double max_link_distance(const ChannelParams& p) {
  p.validate();
  if (p.clec_distance_override_m) return *p.clec_distance_override_m;
  if (p.small_scale_enabled)
    throw Error(ErrorCode::Unsupported, "link radius is undefined for the non-monotone small-scale model");

  double lo = 1e-9;
  if (!clec_satisfied(p, lo)) throw Error(ErrorCode::Infeasible, "link condition fails even at vanishing distance");
  double hi = 1.0;
  while (clec_satisfied(p, hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e15) throw Error(ErrorCode::Infeasible, "link condition holds at every distance");
  }
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (clec_satisfied(p, mid)) lo = mid;
    else hi = mid;
  }
  return lo;
}

LinkModel LinkModel::threshold(double max_distance_m) {
  if (!(max_distance_m > 0.0) || !std::isfinite(max_distance_m))
    throw Error(ErrorCode::Domain, "link threshold must be positive and finite");
  LinkModel m;
  m.is_threshold_ = true;
  m.threshold_m_ = max_distance_m;
  return m;
}

LinkModel LinkModel::channel(const ChannelParams& params) {
  params.validate();
  if (params.clec_distance_override_m) return threshold(*params.clec_distance_override_m);
  LinkModel m;
  m.is_threshold_ = false;
  m.params_ = params;
  return m;
}

double LinkModel::radius_m() const {
  return is_threshold_ ? threshold_m_ : max_link_distance(params_);
}

std::string LinkModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (is_threshold_) {
    os << "threshold:" << threshold_m_;
  } else {
    os << "channel:P=" << params_.transmit_power_dBm << ",P0=" << params_.receive_threshold_dBm
       << ",G1=" << params_.antenna_gain_rx_dBi << ",G2=" << params_.antenna_gain_tx_dBi
       << ",alpha=" << params_.path_loss_exponent << ",fc=" << params_.carrier_freq_Hz
       << ",vc=" << params_.light_speed_m_s << ",sigma2=" << params_.scatter_strength
       << ",K=" << params_.rice_factor << ",small_scale=" << (params_.small_scale_enabled ? 1 : 0);
  }
  return os.str();
}

}  // namespace uavheal
