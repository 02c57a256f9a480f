#pragma once

#include <span>
#include <vector>

#include "tsrisk/simulation.hpp"

namespace tsrisk {

struct MetricOptions {
  double voltage_threshold = 0.05;      // pu deviation that starts to count
  double frequency_threshold_hz = 0.5;  // Hz deviation that starts to count
  double window_s = 1.0;                // trailing steady-state window
  double settle_band = 0.02;            // peak-to-peak / mean for a settled channel
  double voltage_cap = 1.0;             // per-bus deviation used for diverged runs
  double frequency_cap_hz = 2.0;        // per-unit deviation used for diverged runs
  /// Count DFIG rotor-speed change (from its initial value) as a frequency
  /// channel. Off by default: the converter decouples rotor speed from the grid.
  bool include_dfig_frequency = false;
};

struct AngleMetrics {
  double delta_max_deg = 0.0;
  double tsi = 1.0;
  double sev_a = 0.0;
};

/// (360 - d) / (360 + d).
double tsi_from_delta_max(double delta_max_deg);
/// |tsi| for negative tsi, 0 otherwise.
double angle_severity(double tsi);

/// Maximum pairwise SG angle separation over [t_apply, end]. Diverged
/// trajectories report tsi = -1 and severity 1.
AngleMetrics compute_tsi(const Trajectory& traj);

struct SteadyState {
  double value = 0.0;
  bool settled = false;
};

/// Mean of the trailing window of a sampled channel; settled when its
/// peak-to-peak spread is below settle_band times the mean.
SteadyState post_fault_steady_state(std::span<const double> time, std::span<const double> values,
                                    double t_clear, double t_end, double window_s = 1.0,
                                    double settle_band = 0.02);

struct VoltageMetrics {
  std::vector<double> v_post;
  std::vector<double> v_dev;  // 1 - V_k
  std::vector<bool> settled;
  double sev_v = 0.0;
};

struct FrequencyMetrics {
  std::vector<double> f_post;
  std::vector<double> f_dev;  // Hz
  std::vector<bool> settled;
  double sev_f = 0.0;
};

/// Sum of |1 - V_k| over buses whose deviation exceeds the threshold.
double voltage_severity_from(std::span<const double> v_post, const MetricOptions& opts = {});
/// Sum of |f_k - f_nom| over units whose deviation exceeds the threshold.
double frequency_severity_from(std::span<const double> f_dev_hz, const MetricOptions& opts = {});

VoltageMetrics voltage_severity(const Trajectory& traj, const MetricOptions& opts = {});
FrequencyMetrics frequency_severity(const Trajectory& traj, const MetricOptions& opts = {});

struct Severities {
  AngleMetrics angle;
  double sev_v = 0.0;
  double sev_f = 0.0;
  bool settled = true;  // every counted channel settled
  double g() const;
};

Severities evaluate_severities(const Trajectory& traj, const MetricOptions& opts = {});

}  // namespace tsrisk
