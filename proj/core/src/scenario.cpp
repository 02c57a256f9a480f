#include "tsrisk/scenario.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "tsrisk/error.hpp"

namespace tsrisk {

PowerSystemCase apply_wind_penetration(const PowerSystemCase& c,
                                       std::span<const std::string> replaced) {
  PowerSystemCase out = c;
  const std::set<std::string> ids(replaced.begin(), replaced.end());
  for (const auto& id : ids) {
    auto& g = out.generators[c.generator_index(id)];
    if (!g.is_synchronous())
      throw ValidationError("generator " + id + " is not synchronous and cannot be replaced");
    g.kind = GeneratorKind::Dfig;
    g.machine = c.dfig_template;
    g.controls.reset();
  }
  if (out.synchronous_count() < 2)
    throw ValidationError(fmt::format(
        "replacing {} unit(s) leaves {} synchronous generator(s); the angle index needs two",
        ids.size(), out.synchronous_count()));
  out.reindex();
  out.notes = validate_case(out);
  return out;
}

double compute_penetration(const PowerSystemCase& c) {
  double wind = 0.0, total = 0.0;
  for (const auto& g : c.generators) {
    total += g.p_dispatch_mw;
    if (!g.is_synchronous()) wind += g.p_dispatch_mw;
  }
  if (!(total > 0.0)) throw ValidationError("case has no generation to compare against");
  return 100.0 * wind / total;
}

double compute_penetration(const PowerSystemCase& c, const PowerFlowSolution& pf) {
  const auto out = generator_outputs_mva(c, pf);
  double wind = 0.0, total = 0.0;
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    total += out[i].real();
    if (!c.generators[i].is_synchronous()) wind += out[i].real();
  }
  if (!(total > 0.0)) throw ValidationError("case has no generation to compare against");
  return 100.0 * wind / total;
}

std::vector<std::string> replacement_set(int level_pct) {
  switch (level_pct) {
    case 0: return {};
    case 25: return {"G1", "G3"};
    case 50: return {"G1", "G3", "G5", "G9", "G10"};
    case 80: return {"G1", "G3", "G4", "G5", "G6", "G7", "G9", "G10"};
    default:
      throw ConfigError(fmt::format("no replacement set for {}% penetration (use 0, 25, 50 or 80)",
                                    level_pct));
  }
}

PowerSystemCase scale_generation(const PowerSystemCase& c, double factor) {
  if (!(factor >= 1.0)) throw ConfigError(fmt::format("generation scale {} must be >= 1", factor));
  PowerSystemCase out = c;
  for (auto& g : out.generators) g.mva_rating *= factor;
  out.reindex();
  return out;
}

PowerSystemCase scale_load(const PowerSystemCase& c, double factor) {
  if (!(factor > 0.0)) throw ConfigError(fmt::format("load scale {} must be > 0", factor));
  PowerSystemCase out = c;
  for (auto& l : out.loads) {
    l.p_mw *= factor;
    l.q_mvar *= factor;
  }
  out.reindex();
  try {
    solve_power_flow(out);
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("load scale {}: {}", factor, e.what()));
  }
  return out;
}

PowerSystemCase apply_scenario(const PowerSystemCase& c, const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::WindPenetration: return apply_wind_penetration(c, spec.replaced);
    case ScenarioKind::GenerationScale: return scale_generation(c, spec.factor);
    case ScenarioKind::LoadScale: return scale_load(c, spec.factor);
  }
  return c;
}

}  // namespace tsrisk
