#pragma once

#include <optional>
#include <string>

namespace uavheal {

// Air-to-air link budget. Powers in dBm, gains in dBi, frequency in Hz,
// distances in meters.
struct ChannelParams {
  double transmit_power_dBm = 30.0;
  double receive_threshold_dBm = 1.38;
  double antenna_gain_rx_dBi = 6.0;
  double antenna_gain_tx_dBi = 6.0;
  double path_loss_exponent = 1.0;
  double carrier_freq_Hz = 2.4e9;
  double light_speed_m_s = 3.0e8;
  double scatter_strength = 5.0;  // sigma0^2
  double rice_factor = 10.0;      // K
  bool small_scale_enabled = false;
  std::optional<double> clec_distance_override_m = 120.0;

  // Reference link budget with the physical model active (no override).
  static ChannelParams physical();

  // rho^2 = 2 K sigma0^2
  double dominant_strength_sq() const { return 2.0 * rice_factor * scatter_strength; }

  // P + G1 + G2 - P0
  double link_budget_dB() const {
    return transmit_power_dBm + antenna_gain_rx_dBi + antenna_gain_tx_dBi - receive_threshold_dBm;
  }

  void validate() const;
};

// ln I0(x) for x >= 0: power series below x = 15, asymptotic expansion above.
double log_bessel_i0(double x);

// Natural log of the small-scale Rice term at distance l.
double log_rice_term(const ChannelParams& params, double distance_m);

double received_power_dBm(const ChannelParams& params, double distance_m);

bool clec_satisfied(const ChannelParams& params, double distance_m);

// Largest distance at which the link condition still holds (bisection, 1e-6 m).
double max_link_distance(const ChannelParams& params);

// Distance predicate deciding whether two nodes are linked. Either a plain
// "distance <= threshold" rule or the full channel model.
class LinkModel {
 public:
  static LinkModel threshold(double max_distance_m);
  static LinkModel channel(const ChannelParams& params);

  bool operator()(double distance_m) const {
    if (is_threshold_) return distance_m <= threshold_m_;
    return clec_satisfied(params_, distance_m);
  }

  bool is_threshold() const { return is_threshold_; }
  double threshold_m() const { return threshold_m_; }
  const ChannelParams& params() const { return params_; }

  // Radius of the rule; for the channel model this is max_link_distance.
  double radius_m() const;

  std::string describe() const;

 private:
  LinkModel() = default;

  bool is_threshold_ = true;
  double threshold_m_ = 0.0;
  ChannelParams params_{};
};

}  // namespace uavheal
