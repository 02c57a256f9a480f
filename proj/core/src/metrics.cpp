#include "tsrisk/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "tsrisk/error.hpp"

namespace tsrisk {

double tsi_from_delta_max(double delta_max_deg) {
  return (360.0 - delta_max_deg) / (360.0 + delta_max_deg);
}

double angle_severity(double tsi) { return tsi < 0.0 ? std::abs(tsi) : 0.0; }

AngleMetrics compute_tsi(const Trajectory& traj) {
  if (traj.angle_deg.size() < 2)
    throw ValidationError("angle index needs at least two synchronous generators");
  AngleMetrics out;
  double spread_max = 0.0;
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    if (traj.time[r] < traj.t_apply - 1e-9) continue;
    double lo = traj.angle_deg[0][r], hi = lo;
    for (const auto& ch : traj.angle_deg) {
      lo = std::min(lo, ch[r]);
      hi = std::max(hi, ch[r]);
    }
    spread_max = std::max(spread_max, hi - lo);
  }
  out.delta_max_deg = spread_max;
  if (traj.diverged()) {
    out.tsi = -1.0;
    out.sev_a = 1.0;
    return out;
  }
  out.tsi = tsi_from_delta_max(spread_max);
  out.sev_a = angle_severity(out.tsi);
  return out;
}

SteadyState post_fault_steady_state(std::span<const double> time, std::span<const double> values,
                                    double t_clear, double t_end, double window_s,
                                    double settle_band) {
  if (time.size() != values.size()) throw ValidationError("channel and time grid differ in length");
  if (t_end - t_clear < 2.0 * window_s - 1e-9)
    throw ConfigError("steady-state extraction needs at least 2 s between clearing and the end");
  const double start = t_end - window_s;
  double sum = 0.0, lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (time[i] < start - 1e-9 || time[i] > t_end + 1e-9) continue;
    const double v = values[i];
    if (count == 0) lo = hi = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
    ++count;
  }
  if (count == 0) throw ValidationError("steady-state window contains no samples");
  SteadyState out;
  out.value = sum / static_cast<double>(count);
  out.settled = (hi - lo) < settle_band * std::abs(out.value);
  return out;
}

double voltage_severity_from(std::span<const double> v_post, const MetricOptions& opts) {
  double sev = 0.0;
  for (double v : v_post) {
    const double dev = std::abs(1.0 - v);
    if (dev > opts.voltage_threshold) sev += dev;
  }
  return sev;
}

double frequency_severity_from(std::span<const double> f_dev_hz, const MetricOptions& opts) {
  double sev = 0.0;
  for (double d : f_dev_hz) {
    const double dev = std::abs(d);
    if (dev > opts.frequency_threshold_hz) sev += dev;
  }
  return sev;
}

namespace {

double end_time(const Trajectory& traj) { return traj.time.empty() ? 0.0 : traj.time.back(); }

}  // namespace

VoltageMetrics voltage_severity(const Trajectory& traj, const MetricOptions& opts) {
  VoltageMetrics out;
  const std::size_t nb = traj.v_mag.size();
  if (traj.diverged()) {
    out.v_post.assign(nb, 0.0);
    out.v_dev.assign(nb, opts.voltage_cap);
    out.settled.assign(nb, false);
    out.sev_v = opts.voltage_cap * static_cast<double>(nb);
    return out;
  }
  const double t_end = end_time(traj);
  const double t_ref = traj.has_fault ? traj.t_clear : traj.time.front();
  for (const auto& ch : traj.v_mag) {
    const auto ss = post_fault_steady_state(traj.time, ch, t_ref, t_end, opts.window_s,
                                            opts.settle_band);
    out.v_post.push_back(ss.value);
    out.v_dev.push_back(1.0 - ss.value);
    out.settled.push_back(ss.settled);
  }
  out.sev_v = voltage_severity_from(out.v_post, opts);
  return out;
}

FrequencyMetrics frequency_severity(const Trajectory& traj, const MetricOptions& opts) {
  FrequencyMetrics out;
  std::size_t units = traj.freq_hz.size();
  if (opts.include_dfig_frequency) units += traj.dfig_speed.size();
  if (traj.diverged()) {
    out.f_post.assign(units, 0.0);
    out.f_dev.assign(units, opts.frequency_cap_hz);
    out.settled.assign(units, false);
    out.sev_f = opts.frequency_cap_hz * static_cast<double>(units);
    return out;
  }
  const double t_end = end_time(traj);
  const double t_ref = traj.has_fault ? traj.t_clear : traj.time.front();
  for (const auto& ch : traj.freq_hz) {
    const auto ss = post_fault_steady_state(traj.time, ch, t_ref, t_end, opts.window_s,
                                            opts.settle_band);
    out.f_post.push_back(ss.value);
    out.f_dev.push_back(ss.value - traj.nominal_hz);
    out.settled.push_back(ss.settled);
  }
  if (opts.include_dfig_frequency) {
    for (const auto& ch : traj.dfig_speed) {
      const auto ss = post_fault_steady_state(traj.time, ch, t_ref, t_end, opts.window_s,
                                              opts.settle_band);
      const double hz = ss.value * traj.nominal_hz;
      out.f_post.push_back(hz);
      out.f_dev.push_back((ss.value - ch.front()) * traj.nominal_hz);
      out.settled.push_back(ss.settled);
    }
  }
  out.sev_f = frequency_severity_from(out.f_dev, opts);
  return out;
}

double Severities::g() const { return std::max({angle.sev_a, sev_v, sev_f}); }

Severities evaluate_severities(const Trajectory& traj, const MetricOptions& opts) {
  Severities s;
  s.angle = compute_tsi(traj);
  const auto v = voltage_severity(traj, opts);
  const auto f = frequency_severity(traj, opts);
  s.sev_v = v.sev_v;
  s.sev_f = f.sev_f;
  s.settled = std::all_of(v.settled.begin(), v.settled.end(), [](bool b) { return b; }) &&
              std::all_of(f.settled.begin(), f.settled.end(), [](bool b) { return b; });
  return s;
}

}  // namespace tsrisk
