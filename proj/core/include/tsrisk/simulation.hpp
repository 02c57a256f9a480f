#pragma once

#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tsrisk/case.hpp"
#include "tsrisk/fault.hpp"
#include "tsrisk/powerflow.hpp"

namespace tsrisk {

/// How event instants that fall between grid points are handled.
enum class EventAlignment {
  Insert,  // shorten the step so the event lands on a boundary
  Reject,  // event offsets must be whole multiples of dt
};

struct SimulationOptions {
  double t_end = 10.0;
  double dt = 0.005;
  int max_iterations = 10;   // trapezoidal fixed-point iterations per step
  double tolerance = 1e-8;   // state change that ends the iteration
  EventAlignment alignment = EventAlignment::Insert;
  double divergence_angle_deg = 1000.0;
};

enum class Termination { Completed, Diverged };

/// Recorded channels, one column per unit and one row per accepted step.
/// Channels are stored unit-major: angle_deg[unit][row].
struct Trajectory {
  std::vector<double> time;
  std::vector<std::string> sg_ids;
  std::vector<std::string> dfig_ids;
  std::vector<int> bus_ids;

  std::vector<std::vector<double>> angle_deg;  // SG rotor angle
  std::vector<std::vector<double>> freq_hz;    // SG electrical frequency
  std::vector<std::vector<double>> v_mag;      // bus voltage magnitude
  std::vector<std::vector<double>> dfig_speed; // pu
  std::vector<std::vector<double>> dfig_p;     // MW
  std::vector<std::vector<double>> dfig_q;     // MVAr
  std::vector<double> fault_bus_v;             // empty without a fault

  double nominal_hz = 60.0;
  double t_apply = 0.0;  // start of the disturbance window
  double t_clear = 0.0;
  bool has_fault = false;

  Termination termination = Termination::Completed;
  double diverged_at = 0.0;
  std::string cause;

  double max_network_residual = 0.0;  // infinity norm over accepted steps, pu
  int unconverged_steps = 0;

  bool diverged() const { return termination == Termination::Diverged; }
  std::size_t rows() const { return time.size(); }
};

/// Channel naming: t, delta_<gen>, freq_<gen>, vm_<bus>, wr_<gen>, pw_<gen>,
/// qw_<gen>, and vm_fault when a fault was applied.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Dynamic model initialized from a solved operating point. Immutable after
/// construction; one instance can serve concurrent runs.
class DynamicModel {
 public:
  DynamicModel(const PowerSystemCase& c, const PowerFlowSolution& pf);
  ~DynamicModel();
  DynamicModel(DynamicModel&&) noexcept;
  DynamicModel& operator=(DynamicModel&&) noexcept;

  const PowerSystemCase& system() const;
  const PowerFlowSolution& operating_point() const;
  std::size_t state_size() const;
  const std::vector<double>& initial_state() const;
  /// Largest |dx/dt| of the initialized state against the pre-fault network.
  double initial_residual() const;

  Trajectory run(const std::optional<FaultEvent>& fault, const SimulationOptions& opts = {}) const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper: initialize and run once.
Trajectory run_simulation(const PowerSystemCase& c, const PowerFlowSolution& pf,
                          const std::optional<FaultEvent>& fault,
                          const SimulationOptions& opts = {});

}  // namespace tsrisk
