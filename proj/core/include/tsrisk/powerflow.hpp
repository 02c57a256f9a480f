#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tsrisk/case.hpp"

namespace tsrisk {

struct PowerFlowOptions {
  double tolerance = 1e-6;  // pu, max-norm of the P/Q mismatch
  int max_iterations = 20;
  /// PV buses whose generator carries q limits are switched to PQ at the
  /// violated limit. Off by default; the bundled data has no limits.
  bool enforce_q_limits = false;
};

/// Bus quantities follow the case's bus order.
struct PowerFlowSolution {
  std::vector<int> bus_ids;
  std::vector<double> v_mag;
  std::vector<double> v_ang;  // rad, slack = 0
  std::vector<double> p_inj;  // pu net injection
  std::vector<double> q_inj;
  int iterations = 0;
  double max_mismatch = 0.0;

  std::vector<Complex> voltages() const;
};

PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PowerFlowOptions& opts = {});

/// Complex power mismatch (calculated minus specified), pu, for every bus.
/// The slack entry and PV reactive entries are not constrained by the solve.
std::vector<Complex> power_mismatch(const PowerSystemCase& c, std::span<const Complex> v);

struct DispatchReport {
  double total_generation_mw = 0.0;
  double total_load_mw = 0.0;
  double losses_mw = 0.0;
  double slack_generation_mw = 0.0;
  double slack_rating_mva = 0.0;
  std::string slack_generator;
  double balance_error_mw = 0.0;  // generation - load - losses
  std::vector<std::string> warnings;
};

DispatchReport verify_dispatch(const PowerSystemCase& c, const PowerFlowSolution& sol);

/// Per-generator electrical output (MW, MVAr) at the solved point, in
/// generator order.
std::vector<Complex> generator_outputs_mva(const PowerSystemCase& c, const PowerFlowSolution& sol);

/// CSV: bus,v_mag,v_ang_deg,p,q with p/q the net injection in pu.
void write_solution_table(std::ostream& os, const PowerFlowSolution& sol);

}  // namespace tsrisk
