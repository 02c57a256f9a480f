#include "tsrisk/riskmc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "tsrisk/error.hpp"

namespace tsrisk {

double FaultDistributions::type_probability(FaultType type) const {
  switch (type) {
    case FaultType::LLL: return p_lll;
    case FaultType::LLG: return p_llg;
    case FaultType::LL: return p_ll;
    case FaultType::LG: return p_lg;
  }
  return 0.0;
}

void FaultDistributions::validate() const {
  for (double p : {p_lll, p_llg, p_ll, p_lg})
    if (p < 0.0) throw ConfigError("fault-type probabilities must be non-negative");
  if (std::abs(p_lll + p_llg + p_ll + p_lg - 1.0) > 1e-9)
    throw ConfigError("fault-type probabilities must sum to 1");
  if (!(fct_std >= 0.0) || !(fct_truncation > 0.0))
    throw ConfigError("clearing-time spread must be >= 0 with a positive truncation");
  if (!(fct_mean - fct_truncation * fct_std > 0.0))
    throw ConfigError("clearing-time distribution must stay positive after truncation");
  if (t_apply < 0.0) throw ConfigError("fault application time must be >= 0");
}

std::uint64_t sample_seed(std::uint64_t master_seed, std::uint64_t index) {
  // splitmix64 over a mix of the master seed and the index.
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

FaultEvent sample_fault(std::mt19937_64& rng, std::span<const int> lines,
                        const FaultDistributions& dist) {
  if (lines.empty()) throw ConfigError("no fault-eligible lines to sample from");
  static constexpr FaultType kTypes[] = {FaultType::LLL, FaultType::LLG, FaultType::LL,
                                         FaultType::LG};
  std::discrete_distribution<int> type_dist({dist.p_lll, dist.p_llg, dist.p_ll, dist.p_lg});
  std::uniform_int_distribution<std::size_t> line_dist(0, lines.size() - 1);
  std::uniform_int_distribution<int> loc_dist(1, 100);
  std::normal_distribution<double> fct_dist(dist.fct_mean, dist.fct_std);

  FaultEvent f;
  f.type = kTypes[type_dist(rng)];
  f.line = lines[line_dist(rng)];
  f.location_pct = loc_dist(rng);
  double fct = fct_dist(rng);
  while (std::abs(fct - dist.fct_mean) > dist.fct_truncation * dist.fct_std || !(fct > 0.0))
    fct = fct_dist(rng);
  f.t_apply = dist.t_apply;
  f.t_clear = dist.t_apply + fct;
  f.trip_line = dist.trip_line;
  return f;
}

double fault_probability(const FaultEvent& f, std::size_t line_count,
                         const FaultDistributions& dist) {
  return dist.type_probability(f.type) / (static_cast<double>(line_count) * 100.0);
}

const char* to_string(RiskMode mode) {
  return mode == RiskMode::Sampled ? "sampled" : "weighted";
}

RiskMode parse_risk_mode(const std::string& text) {
  if (text == "sampled") return RiskMode::Sampled;
  if (text == "weighted") return RiskMode::Weighted;
  throw ConfigError("unknown risk mode '" + text + "' (expected sampled or weighted)");
}

NormalFit fit_normal(std::span<const double> values) {
  if (values.size() < 2) throw ConfigError("a normal fit needs at least two samples");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

bool convergence_check(std::span<const Checkpoint> history, std::size_t window, double threshold) {
  if (history.empty()) return false;
  const std::size_t last = history.back().n;
  if (last < window) return false;
  const std::size_t limit = last - window;
  std::size_t anchor = history.size();
  for (std::size_t i = 0; i < history.size(); ++i)
    if (history[i].n <= limit) anchor = i;
  if (anchor == history.size()) return false;

  auto spread = [&](double Checkpoint::*field) {
    double lo = history[anchor].*field, hi = lo;
    for (std::size_t i = anchor; i < history.size(); ++i) {
      lo = std::min(lo, history[i].*field);
      hi = std::max(hi, history[i].*field);
    }
    return hi - lo;
  };
  return spread(&Checkpoint::r_am) < threshold && spread(&Checkpoint::r_vm) < threshold &&
         spread(&Checkpoint::r_fm) < threshold;
}

MonteCarloResult run_monte_carlo(std::span<const int> lines, const FaultDistributions& dist,
                                 const MonteCarloConfig& cfg, const SampleEvaluator& evaluate,
                                 const ProgressCallback& progress) {
  dist.validate();
  if (lines.empty()) throw ConfigError("no fault-eligible lines to sample from");
  if (cfg.n_max == 0) throw ConfigError("sample budget must be positive");
  if (cfg.checkpoint_every == 0) throw ConfigError("checkpoint interval must be positive");
  const unsigned workers = std::max(1u, cfg.workers);

  MonteCarloResult out;
  auto& s = out.summary;
  s.seed = cfg.seed;
  s.mode = cfg.mode;
  out.samples.reserve(std::min<std::size_t>(cfg.n_max, 1u << 20));

  double sum_a = 0.0, sum_v = 0.0, sum_f = 0.0;
  std::size_t done = 0;

  auto evaluate_one = [&](std::uint64_t index) {
    SampleRecord rec;
    rec.id = index;
    std::mt19937_64 rng(sample_seed(cfg.seed, index));
    rec.fault = sample_fault(rng, lines, dist);
    rec.pr_fault = fault_probability(rec.fault, lines.size(), dist);
    try {
      const auto o = evaluate(rec.fault);
      rec.sev_a = o.sev_a;
      rec.sev_v = o.sev_v;
      rec.sev_f = o.sev_f;
      rec.g_sample = std::max({o.sev_a, o.sev_v, o.sev_f});
      rec.termination = o.termination == Termination::Diverged ? "diverged" : "completed";
    } catch (const Error& e) {
      rec.termination = "failed";
      rec.failure = e.what();
    }
    return rec;
  };

  while (done < cfg.n_max) {
    const std::size_t batch = std::min(cfg.checkpoint_every, cfg.n_max - done);
    std::vector<SampleRecord> results(batch);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= batch) return;
        try {
          results[i] = evaluate_one(done + i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(batch);
          return;
        }
      }
    };
    const unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, batch));
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    for (auto& rec : results) {
      if (rec.termination == "failed") {
        ++s.failed;
      } else {
        if (rec.termination == "diverged") ++s.diverged;
        const double w = cfg.mode == RiskMode::Weighted ? rec.pr_fault : 1.0;
        sum_a += w * rec.sev_a;
        sum_v += w * rec.sev_v;
        sum_f += w * rec.sev_f;
        ++s.n;
      }
      out.samples.push_back(std::move(rec));
    }
    done += batch;

    if (s.n > 0) {
      const double n = static_cast<double>(s.n);
      Checkpoint cp{s.n, sum_a / n, sum_v / n, sum_f / n, 0.0};
      cp.g = std::max({cp.r_am, cp.r_vm, cp.r_fm});
      s.history.push_back(cp);
      if (progress) progress(cp);
      if (!s.converged && convergence_check(s.history, cfg.window, cfg.threshold)) {
        s.converged = true;
        s.converged_at = s.n;
        if (cfg.stop_at_convergence) break;
      }
    }
  }

  if (s.n == 0) throw NumericalError("every Monte Carlo sample failed");
  const double attempted = static_cast<double>(out.samples.size());
  if (static_cast<double>(s.failed) > cfg.max_failure_rate * attempted) {
    std::string first;
    for (const auto& r : out.samples)
      if (!r.failure.empty()) {
        first = r.failure;
        break;
      }
    throw NumericalError(fmt::format("{} of {} samples failed (first: {})", s.failed,
                                     out.samples.size(), first));
  }

  const auto& last = s.history.back();
  s.r_am = last.r_am;
  s.r_vm = last.r_vm;
  s.r_fm = last.r_fm;
  s.g = std::max({s.r_am, s.r_vm, s.r_fm});
  std::vector<double> g_values;
  g_values.reserve(s.n);
  for (const auto& r : out.samples)
    if (r.termination != "failed") g_values.push_back(r.g_sample);
  if (g_values.size() >= 2) s.g_fit = fit_normal(g_values);
  else s.g_fit = {g_values.front(), 0.0};
  return out;
}

SampleEvaluator simulation_evaluator(const DynamicModel& model, const SimulationOptions& sim,
                                     const MetricOptions& metrics) {
  return [&model, sim, metrics](const FaultEvent& f) {
    const auto traj = model.run(f, sim);
    const auto sev = evaluate_severities(traj, metrics);
    return SampleOutcome{sev.angle.sev_a, sev.sev_v, sev.sev_f, traj.termination};
  };
}

void write_samples_csv(std::ostream& os, std::span<const SampleRecord> samples) {
  os << "sample_id,line,type,location_pct,fct_s,sev_a,sev_v,sev_f,g_sample,termination\n";
  for (const auto& r : samples) {
    os << fmt::format("{},{},{},{},{:.9f},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", r.id, r.fault.line,
                      to_string(r.fault.type), r.fault.location_pct,
                      r.fault.t_clear - r.fault.t_apply, r.sev_a, r.sev_v, r.sev_f, r.g_sample,
                      r.termination);
  }
}

std::string summary_json(const RiskSummary& s) {
  nlohmann::ordered_json j;
  j["n"] = s.n;
  j["failed"] = s.failed;
  j["diverged"] = s.diverged;
  j["risk_mode"] = to_string(s.mode);
  j["seed"] = s.seed;
  j["R_AM"] = s.r_am;
  j["R_VM"] = s.r_vm;
  j["R_FM"] = s.r_fm;
  j["G"] = s.g;
  j["g_fit"] = {{"mean", s.g_fit.mean}, {"std", s.g_fit.std}};
  j["converged"] = s.converged;
  j["converged_at"] = s.converged_at;
  auto hist = nlohmann::ordered_json::array();
  for (const auto& c : s.history)
    hist.push_back({{"n", c.n}, {"R_AM", c.r_am}, {"R_VM", c.r_vm}, {"R_FM", c.r_fm}, {"G", c.g}});
  j["history"] = std::move(hist);
  return j.dump(2) + "\n";
}

std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram needs at least one bin");
  if (values.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) return {{lo, values.size()}};
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) out[b].center = lo + (static_cast<double>(b) + 0.5) * width;
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    out[std::min(b, bins - 1)].count++;
  }
  return out;
}

void write_histogram_csv(std::ostream& os, std::span<const HistogramBin> bins) {
  os << "bin_center,count\n";
  for (const auto& b : bins) os << fmt::format("{:.9g},{}\n", b.center, b.count);
}

}  // namespace tsrisk
