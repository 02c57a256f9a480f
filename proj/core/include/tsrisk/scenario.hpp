#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsrisk/case.hpp"
#include "tsrisk/powerflow.hpp"

namespace tsrisk {

/// Converts the listed synchronous units into DFIG aggregates built from the
/// case's DFIG template, keeping bus, MW dispatch, MVA rating and voltage
/// setpoint. Rejects the transform if fewer than two synchronous units remain.
PowerSystemCase apply_wind_penetration(const PowerSystemCase& c,
                                       std::span<const std::string> replaced);

/// 100 x wind MW / total MW over the scheduled dispatch.
double compute_penetration(const PowerSystemCase& c);
/// Same ratio with every unit's output taken from a solved power flow (the
/// slack contributes what it actually produces).
double compute_penetration(const PowerSystemCase& c, const PowerFlowSolution& pf);

/// Units replaced for the nominal penetration levels 0, 25, 50 and 80 %.
std::vector<std::string> replacement_set(int level_pct);

/// Ratings (and with them the machine inertia and admittance bases) grow by
/// factor; dispatch is unchanged. factor >= 1.
PowerSystemCase scale_generation(const PowerSystemCase& c, double factor);

/// Scales every load's P and Q; the slack absorbs the difference. Throws
/// NumericalError naming the factor when the scaled case has no power-flow
/// solution.
PowerSystemCase scale_load(const PowerSystemCase& c, double factor);

enum class ScenarioKind { WindPenetration, GenerationScale, LoadScale };

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::WindPenetration;
  std::vector<std::string> replaced;
  double factor = 1.0;
};

PowerSystemCase apply_scenario(const PowerSystemCase& c, const ScenarioSpec& spec);

}  // namespace tsrisk
