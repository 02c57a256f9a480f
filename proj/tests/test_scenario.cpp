#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tsrisk/error.hpp"
#include "tsrisk/metrics.hpp"
#include "tsrisk/scenario.hpp"
#include "tsrisk/simulation.hpp"

using namespace tsrisk;
using tsrisk::test::ieee39;

namespace {

double max_voltage_difference(const PowerFlowSolution& a, const PowerFlowSolution& b) {
  double d = 0.0;
  const auto va = a.voltages(), vb = b.voltages();
  for (std::size_t k = 0; k < va.size(); ++k) d = std::max(d, std::abs(va[k] - vb[k]));
  return d;
}

double peak_swing(const PowerSystemCase& c) {
  const DynamicModel m(c, solve_power_flow(c));
  FaultEvent f;
  f.line = *c.find_branch_between(16, 17);
  f.type = FaultType::LLL;
  f.location_pct = 50;
  f.t_apply = 1.0;
  f.t_clear = 1.15;
  SimulationOptions opts;
  opts.t_end = 4.0;
  return compute_tsi(m.run(f, opts)).delta_max_deg;
}

}  // namespace

TEST_CASE("nominal penetration levels") {
  const auto& c = ieee39();
  CHECK(compute_penetration(c) == 0.0);
  for (int level : {25, 50, 80}) {
    const auto w = apply_wind_penetration(c, replacement_set(level));
    const double pen = compute_penetration(w);
    INFO("level ", level, " actual ", pen);
    CHECK(std::abs(pen - level) <= 3.0);
    CHECK(w.synchronous_count() == c.generators.size() - replacement_set(level).size());
  }
  CHECK_THROWS_AS(replacement_set(30), ConfigError);
}

TEST_CASE("empty replacement is the identity") {
  const auto& c = ieee39();
  const auto w = apply_wind_penetration(c, std::vector<std::string>{});
  CHECK(compute_penetration(w) == 0.0);
  CHECK(w.synchronous_count() == c.synchronous_count());
  CHECK(max_voltage_difference(solve_power_flow(c), solve_power_flow(w)) == 0.0);
}

TEST_CASE("replacement keeps bus, dispatch, rating and setpoint") {
  const auto& c = ieee39();
  const auto w = apply_wind_penetration(c, replacement_set(50));
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    CHECK(w.generators[g].bus == c.generators[g].bus);
    CHECK(w.generators[g].p_dispatch_mw == c.generators[g].p_dispatch_mw);
    CHECK(w.generators[g].mva_rating == c.generators[g].mva_rating);
  }
  CHECK(max_voltage_difference(solve_power_flow(c), solve_power_flow(w)) < 1e-12);
}

TEST_CASE("too few synchronous units is rejected") {
  const auto& c = ieee39();
  std::vector<std::string> ids;
  for (const auto& g : c.generators) ids.push_back(g.id);
  ids.pop_back();
  CHECK_THROWS_AS(apply_wind_penetration(c, ids), ValidationError);
  ids.pop_back();
  CHECK_NOTHROW(apply_wind_penetration(c, ids));
  const std::vector<std::string> unknown = {"G99"};
  CHECK_THROWS(apply_wind_penetration(c, unknown));
}

TEST_CASE("penetration from the solved flow counts the slack output") {
  const auto w = apply_wind_penetration(ieee39(), replacement_set(25));
  const double scheduled = compute_penetration(w);
  const double solved = compute_penetration(w, solve_power_flow(w));
  CHECK(solved < scheduled);
  CHECK(std::abs(solved - scheduled) < 0.5);
}

TEST_CASE("generation scaling") {
  const auto& c = ieee39();
  const auto same = scale_generation(c, 1.0);
  CHECK(max_voltage_difference(solve_power_flow(c), solve_power_flow(same)) == 0.0);
  const auto big = scale_generation(c, 1.2);
  for (std::size_t g = 0; g < c.generators.size(); ++g)
    CHECK(big.generators[g].mva_rating == doctest::Approx(1.2 * c.generators[g].mva_rating));
  CHECK(max_voltage_difference(solve_power_flow(c), solve_power_flow(big)) < 1e-12);
  CHECK_THROWS_AS(scale_generation(c, 0.9), ConfigError);
}

TEST_CASE("load scaling") {
  const auto& c = ieee39();
  const auto up = scale_load(c, 1.1);
  CHECK(up.total_load_mw() == doctest::Approx(6706.81).epsilon(1e-9));
  const auto pf = solve_power_flow(up);
  CHECK(verify_dispatch(up, pf).warnings.size() > 0);
  CHECK_THROWS_AS(scale_load(c, 0.0), ConfigError);
  try {
    scale_load(c, 5.0);
    FAIL("expected a power-flow failure");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("load scale 5") != std::string::npos);
  }
}

TEST_CASE("scenario dispatch") {
  const auto& c = ieee39();
  ScenarioSpec s;
  s.replaced = replacement_set(25);
  CHECK(compute_penetration(apply_scenario(c, s)) > 20.0);
  s.kind = ScenarioKind::LoadScale;
  s.factor = 1.1;
  CHECK(apply_scenario(c, s).total_load_mw() > c.total_load_mw());
  s.kind = ScenarioKind::GenerationScale;
  s.factor = 1.2;
  CHECK(apply_scenario(c, s).generators[0].mva_rating > c.generators[0].mva_rating);
}

TEST_CASE("stress scenarios move the peak swing the expected way") {
  const auto& c = ieee39();
  const double base = peak_swing(c);
  CHECK(peak_swing(scale_generation(c, 1.2)) < base);
  CHECK(peak_swing(scale_load(c, 1.1)) > base);
}
