#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tsrisk/fault.hpp"
#include "tsrisk/metrics.hpp"
#include "tsrisk/simulation.hpp"

namespace tsrisk {

struct FaultDistributions {
  double p_lll = 0.05;
  double p_llg = 0.10;
  double p_ll = 0.15;
  double p_lg = 0.70;
  double fct_mean = 0.2;     // s
  double fct_std = 0.005;    // s
  double fct_truncation = 4.0;  // resample beyond this many standard deviations
  double t_apply = 1.0;
  bool trip_line = true;

  double type_probability(FaultType type) const;
  /// Throws ConfigError when probabilities do not sum to one or the clearing
  /// time distribution admits non-positive values.
  void validate() const;
};

/// Stream seed for one sample, independent of execution order.
std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index);

FaultEvent sample_fault(std::mt19937_64& rng, std::span<const int> lines,
                        const FaultDistributions& dist);

/// Probability of one discrete outcome: (1/N_L)(1/100) Pr(type).
double fault_probability(const FaultEvent& f, std::size_t line_count,
                         const FaultDistributions& dist);

enum class RiskMode { Sampled, Weighted };
const char* to_string(RiskMode mode);
RiskMode parse_risk_mode(const std::string& text);

/// Severities returned by an evaluator for one fault.
struct SampleOutcome {
  double sev_a = 0.0;
  double sev_v = 0.0;
  double sev_f = 0.0;
  Termination termination = Termination::Completed;
};

/// Must be safe to call concurrently. Throwing tsrisk::Error marks the sample
/// failed.
using SampleEvaluator = std::function<SampleOutcome(const FaultEvent&)>;

struct SampleRecord {
  std::uint64_t id = 0;
  FaultEvent fault;
  double sev_a = 0.0;
  double sev_v = 0.0;
  double sev_f = 0.0;
  double g_sample = 0.0;
  double pr_fault = 0.0;
  std::string termination;  // completed, diverged or failed
  std::string failure;      // reason for failed samples
};

struct NormalFit {
  double mean = 0.0;
  double std = 0.0;
};

/// Sample mean and unbiased standard deviation; needs two or more values.
NormalFit fit_normal(std::span<const double> values);

struct Checkpoint {
  std::size_t n = 0;
  double r_am = 0.0;
  double r_vm = 0.0;
  double r_fm = 0.0;
  double g = 0.0;
};

/// True when each running mean moved by less than threshold over the
/// trailing window: the checkpoints from the latest one at or before
/// N_last - window up to N_last.
bool convergence_check(std::span<const Checkpoint> history, std::size_t window, double threshold);

struct MonteCarloConfig {
  std::size_t n_max = 30000;
  std::uint64_t seed = 20240601;
  RiskMode mode = RiskMode::Sampled;
  std::size_t window = 5000;
  double threshold = 0.005;
  std::size_t checkpoint_every = 1000;
  unsigned workers = 1;
  bool stop_at_convergence = true;
  double max_failure_rate = 0.001;
};

struct RiskSummary {
  std::size_t n = 0;  // successful samples
  std::size_t failed = 0;
  std::size_t diverged = 0;
  double r_am = 0.0;
  double r_vm = 0.0;
  double r_fm = 0.0;
  double g = 0.0;
  NormalFit g_fit;
  std::vector<Checkpoint> history;
  bool converged = false;
  std::size_t converged_at = 0;
  std::uint64_t seed = 0;
  RiskMode mode = RiskMode::Sampled;
};

struct MonteCarloResult {
  RiskSummary summary;
  std::vector<SampleRecord> samples;
};

using ProgressCallback = std::function<void(const Checkpoint&)>;

/// Draws faults, evaluates them on a worker pool and aggregates in sample
/// order, so the result does not depend on the worker count.
MonteCarloResult run_monte_carlo(std::span<const int> lines, const FaultDistributions& dist,
                                 const MonteCarloConfig& cfg, const SampleEvaluator& evaluate,
                                 const ProgressCallback& progress = {});

/// Evaluator that simulates each fault on a shared initialized model.
SampleEvaluator simulation_evaluator(const DynamicModel& model, const SimulationOptions& sim,
                                     const MetricOptions& metrics);

void write_samples_csv(std::ostream& os, std::span<const SampleRecord> samples);
std::string summary_json(const RiskSummary& s);

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
};
/// Equal-width bins spanning [min, max] of the values (a single bin when all
/// values coincide).
std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins);
void write_histogram_csv(std::ostream& os, std::span<const HistogramBin> bins);

}  // namespace tsrisk
