#include <doctest.h>

#include <cmath>
#include <numbers>

#include "uavheal/channel.hpp"
#include "uavheal/errors.hpp"
#include "uavheal/rng.hpp"

using namespace uavheal;

namespace {

// Free-space radius solved in closed form from P + G1 + G2 - 10 a log10(4 pi l fc / vc) = P0.
double closed_form_radius(const ChannelParams& p) {
  return p.light_speed_m_s / (4.0 * std::numbers::pi * p.carrier_freq_Hz) *
         std::pow(10.0, p.link_budget_dB() / (10.0 * p.path_loss_exponent));
}

}  // namespace

TEST_CASE("log_bessel_i0 against std::cyl_bessel_i") {
  CHECK(log_bessel_i0(0.0) == 0.0);
  CHECK(log_bessel_i0(1.0) == doctest::Approx(0.2359).epsilon(1e-4));
  for (double x = 0.01; x < 600.0; x *= 1.07) {
    const double ref = std::log(std::cyl_bessel_i(0.0, x));
    CHECK(std::abs(std::exp(log_bessel_i0(x) - ref) - 1.0) < 1e-7);
  }
  // across the series / asymptotic switch
  for (double x = 14.0; x < 16.0; x += 0.01) {
    const double ref = std::log(std::cyl_bessel_i(0.0, x));
    CHECK(std::abs(std::exp(log_bessel_i0(x) - ref) - 1.0) < 1e-7);
  }
  CHECK(std::isfinite(log_bessel_i0(1e6)));
  CHECK(log_bessel_i0(1e6) == doctest::Approx(1e6 - 0.5 * std::log(2 * std::numbers::pi * 1e6)).epsilon(1e-12));
  CHECK_THROWS_AS(log_bessel_i0(-1.0), Error);
  CHECK_THROWS_AS(log_bessel_i0(NAN), Error);
}

TEST_CASE("rice term in log domain matches the direct product at small distance") {
  ChannelParams p = ChannelParams::physical();
  const double s2 = p.scatter_strength;
  const double rho2 = p.dominant_strength_sq();
  for (double l = 0.05; l <= 5.0; l += 0.05) {
    const double direct = l / s2 * std::exp((-l * l - rho2) / (2 * s2)) * std::cyl_bessel_i(0.0, 2 * p.rice_factor * l);
    CHECK(log_rice_term(p, l) == doctest::Approx(std::log(direct)).epsilon(1e-9));
  }
  CHECK(std::isfinite(log_rice_term(p, 1000.0)));
}

TEST_CASE("received power") {
  ChannelParams p = ChannelParams::physical();
  const double l = 120.0;
  const double expected = 42.0 - 10.0 * std::log10(4 * std::numbers::pi * l * 2.4e9 / 3e8);
  CHECK(received_power_dBm(p, l) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(received_power_dBm(p, l) == doctest::Approx(1.19).epsilon(0.01));
  const double unit = 3e8 / (4 * std::numbers::pi * 2.4e9);
  CHECK(received_power_dBm(p, unit) == doctest::Approx(42.0).epsilon(1e-12));
  CHECK_THROWS_AS(received_power_dBm(p, 0.0), Error);
  CHECK_THROWS_AS(received_power_dBm(p, -3.0), Error);
}

TEST_CASE("link predicate") {
  ChannelParams def;
  CHECK(clec_satisfied(def, 119.9));
  CHECK(clec_satisfied(def, 120.0));
  CHECK_FALSE(clec_satisfied(def, 120.1));
  CHECK(max_link_distance(def) == 120.0);

  ChannelParams p = ChannelParams::physical();
  CHECK(clec_satisfied(p, 100.0));
  CHECK(received_power_dBm(p, 100.0) == doctest::Approx(1.98).epsilon(0.01));
  const double r = max_link_distance(p);
  CHECK(r == doctest::Approx(closed_form_radius(p)).epsilon(1e-8));
  CHECK(std::abs(r - 114.7) < 0.1);
  CHECK(clec_satisfied(p, r - 1e-5));
  CHECK_FALSE(clec_satisfied(p, r + 1e-5));
}

TEST_CASE("radius follows the closed form over random parameters") {
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    ChannelParams p = ChannelParams::physical();
    p.transmit_power_dBm = rng.uniform(10.0, 40.0);
    p.path_loss_exponent = rng.uniform(1.0, 3.0);
    p.carrier_freq_Hz = rng.uniform(1e9, 6e9);
    const double want = closed_form_radius(p);
    if (want < 1e-3 || want > 1e5) continue;
    CHECK(std::abs(max_link_distance(p) - want) <= 1e-6);
  }
}

TEST_CASE("max_link_distance errors") {
  ChannelParams p = ChannelParams::physical();
  p.small_scale_enabled = true;
  CHECK_THROWS_WITH_AS(max_link_distance(p), doctest::Contains("unsupported"), Error);
  ChannelParams weak = ChannelParams::physical();
  weak.carrier_freq_Hz = 1e30;
  try {
    max_link_distance(weak);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Infeasible);
  }
}

TEST_CASE("LinkModel") {
  auto t = LinkModel::threshold(120.0);
  CHECK(t(120.0));
  CHECK_FALSE(t(std::nextafter(120.0, 200.0)));
  CHECK(t.radius_m() == 120.0);
  CHECK(t.describe() == "threshold:120");
  auto c = LinkModel::channel(ChannelParams::physical());
  CHECK_FALSE(c.is_threshold());
  CHECK(std::abs(c.radius_m() - 114.7) < 0.1);
  CHECK(c(100.0));
  CHECK_FALSE(c(115.0));
}
