#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tsrisk/error.hpp"
#include "tsrisk/metrics.hpp"

using namespace tsrisk;

namespace {

constexpr double kRound = 1e-12;

// Synthetic trajectory on a 5 ms grid from 0 to 10 s with a fault 1.0-1.2 s.
Trajectory synthetic(std::size_t gens, std::size_t buses) {
  Trajectory t;
  for (int i = 0; i <= 2000; ++i) t.time.push_back(i * 0.005);
  t.angle_deg.assign(gens, std::vector<double>(t.time.size(), 0.0));
  t.freq_hz.assign(gens, std::vector<double>(t.time.size(), 60.0));
  t.v_mag.assign(buses, std::vector<double>(t.time.size(), 1.0));
  for (std::size_t g = 0; g < gens; ++g) t.sg_ids.push_back("G" + std::to_string(g + 1));
  for (std::size_t b = 0; b < buses; ++b) t.bus_ids.push_back(static_cast<int>(b + 1));
  t.t_apply = 1.0;
  t.t_clear = 1.2;
  t.has_fault = true;
  return t;
}

}  // namespace

TEST_CASE("angle index examples") {
  CHECK(tsi_from_delta_max(0.0) == 1.0);
  CHECK(angle_severity(tsi_from_delta_max(0.0)) == 0.0);
  CHECK(tsi_from_delta_max(540.0) == doctest::Approx(-0.2).epsilon(kRound));
  CHECK(angle_severity(tsi_from_delta_max(540.0)) == doctest::Approx(0.2).epsilon(kRound));
  CHECK(tsi_from_delta_max(360.0) == 0.0);
  CHECK(angle_severity(0.0) == 0.0);
}

TEST_CASE("angle index properties") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.0, 5000.0);
  for (int i = 0; i < 2000; ++i) {
    const double a = d(rng), b = d(rng);
    const double ta = tsi_from_delta_max(a), tb = tsi_from_delta_max(b);
    CHECK(ta > -1.0);
    CHECK(ta <= 1.0);
    if (a < b) CHECK(ta > tb);
    CHECK((ta < 0.0) == (a > 360.0));
    CHECK(angle_severity(ta) >= 0.0);
    CHECK(angle_severity(ta) < 1.0);
  }
}

TEST_CASE("peak separation is taken from fault application onwards") {
  auto t = synthetic(3, 2);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    t.angle_deg[1][r] = 20.0 + 40.0 * std::sin(t.time[r]);
    t.angle_deg[2][r] = -15.0;
  }
  t.angle_deg[1][10] = 500.0;  // before t_apply, ignored
  const auto a = compute_tsi(t);
  CHECK(a.delta_max_deg == doctest::Approx(20.0 + 40.0 + 15.0).epsilon(1e-6));

  // Permuting the generators changes nothing.
  auto p = t;
  std::swap(p.angle_deg[0], p.angle_deg[2]);
  CHECK(compute_tsi(p).delta_max_deg == a.delta_max_deg);

  auto one = synthetic(1, 2);
  CHECK_THROWS_AS(compute_tsi(one), ValidationError);
}

TEST_CASE("steady-state extraction") {
  const auto t = synthetic(2, 1);
  SUBCASE("constant channel") {
    const std::vector<double> v(t.rows(), 0.98);
    const auto ss = post_fault_steady_state(t.time, v, 1.2, 10.0);
    CHECK(ss.value == doctest::Approx(0.98).epsilon(kRound));
    CHECK(ss.settled);
  }
  SUBCASE("decaying oscillation") {
    std::vector<double> v;
    for (double s : t.time) v.push_back(0.95 + 0.05 * std::exp(-(s - 1.2) / 1.5) * std::cos(8.0 * s));
    const auto ss = post_fault_steady_state(t.time, v, 1.2, 10.0);
    // The residual ripple in the last second is bounded by its envelope.
    const double ripple = 0.05 * std::exp(-(9.0 - 1.2) / 1.5);
    CHECK(std::abs(ss.value - 0.95) <= ripple);
    CHECK(ss.settled);
  }
  SUBCASE("sustained oscillation") {
    std::vector<double> v;
    for (double s : t.time) v.push_back(1.0 + 0.05 * std::sin(2.0 * std::numbers::pi * 1.3 * s));
    const auto ss = post_fault_steady_state(t.time, v, 1.2, 10.0);
    CHECK_FALSE(ss.settled);
    CHECK(std::abs(ss.value - 1.0) < 0.05);
  }
  SUBCASE("window too short") {
    const std::vector<double> v(t.rows(), 1.0);
    CHECK_THROWS_AS(post_fault_steady_state(t.time, v, 8.5, 10.0), ConfigError);
  }
}

TEST_CASE("voltage threshold arithmetic") {
  CHECK(voltage_severity_from(std::vector<double>(39, 1.0)) == 0.0);
  std::vector<double> v(39, 0.99);
  v[5] = 0.92;
  CHECK(voltage_severity_from(v) == doctest::Approx(0.08).epsilon(kRound));
  CHECK(voltage_severity_from(std::vector<double>{0.96}) == 0.0);
  CHECK(voltage_severity_from(std::vector<double>{1.07, 0.9}) == doctest::Approx(0.17).epsilon(kRound));
}

TEST_CASE("frequency threshold arithmetic") {
  CHECK(frequency_severity_from(std::vector<double>(10, 0.0)) == 0.0);
  CHECK(frequency_severity_from(std::vector<double>{59.2 - 60.0}) == doctest::Approx(0.8).epsilon(kRound));
  CHECK(frequency_severity_from(std::vector<double>{59.7 - 60.0}) == 0.0);
}

TEST_CASE("lower thresholds never reduce severity") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> v(1.0, 0.06);
  std::vector<double> post(39);
  for (auto& x : post) x = v(rng);
  double last = -1.0;
  for (double th : {0.1, 0.08, 0.05, 0.03, 0.01, 0.0}) {
    MetricOptions o;
    o.voltage_threshold = th;
    const double s = voltage_severity_from(post, o);
    CHECK(s >= last);
    last = s;
  }
}

TEST_CASE("trajectory severities") {
  auto t = synthetic(3, 4);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    t.v_mag[2][r] = 0.9;
    t.freq_hz[1][r] = 59.3;
  }
  const auto s = evaluate_severities(t);
  CHECK(s.angle.sev_a == 0.0);
  CHECK(s.sev_v == doctest::Approx(0.1).epsilon(kRound));
  CHECK(s.sev_f == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(s.settled);
  CHECK(s.g() == s.sev_f);
}

TEST_CASE("diverged runs take the caps") {
  auto t = synthetic(10, 39);
  t.termination = Termination::Diverged;
  const auto s = evaluate_severities(t);
  CHECK(s.angle.tsi == -1.0);
  CHECK(s.angle.sev_a == 1.0);
  CHECK(s.sev_v == 39.0);
  CHECK(s.sev_f == 20.0);
  CHECK(s.g() >= 1.0);
  CHECK_FALSE(s.settled);

  // A diverged run dominates any completed run of the same system.
  auto ok = synthetic(10, 39);
  for (std::size_t r = 0; r < ok.rows(); ++r) {
    ok.angle_deg[3][r] = 350.0;
    for (auto& ch : ok.v_mag) ch[r] = 0.5;
  }
  const auto c = evaluate_severities(ok);
  CHECK(s.angle.sev_a >= c.angle.sev_a);
  CHECK(s.sev_v >= c.sev_v);
}
