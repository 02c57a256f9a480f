#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "support.hpp"
#include "tsrisk/error.hpp"
#include "tsrisk/riskmc.hpp"

using namespace tsrisk;
using tsrisk::test::ieee39;

namespace {

std::vector<FaultEvent> draw(std::size_t n, std::span<const int> lines,
                             const FaultDistributions& dist = {}) {
  std::vector<FaultEvent> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(sample_seed(20240601, i));
    out.push_back(sample_fault(rng, lines, dist));
  }
  return out;
}

double type_weight(FaultType t) {
  switch (t) {
    case FaultType::LLL: return 1.0;
    case FaultType::LLG: return 0.6;
    case FaultType::LL: return 0.35;
    case FaultType::LG: return 0.1;
  }
  return 0.0;
}

// Severities that depend only on the fault tuple, so the exact expectation can
// be enumerated.
SampleOutcome analytic(const FaultEvent& f) {
  const double loc = f.location_pct / 100.0;
  SampleOutcome o;
  o.sev_a = type_weight(f.type) * (1.0 - loc) * (f.line % 7) / 6.0;
  o.sev_v = 0.2 * type_weight(f.type) + 0.01 * (f.line % 3);
  o.sev_f = loc * loc * type_weight(f.type);
  return o;
}

MonteCarloConfig small_config(std::size_t n) {
  MonteCarloConfig cfg;
  cfg.n_max = n;
  cfg.checkpoint_every = 500;
  cfg.window = 2000;
  cfg.stop_at_convergence = false;
  return cfg;
}

std::string csv(const MonteCarloResult& r) {
  std::ostringstream os;
  write_samples_csv(os, r.samples);
  return os.str();
}

}  // namespace

TEST_CASE("sampler marginals over 30,000 draws") {
  const auto lines = ieee39().fault_eligible_branches();
  const auto faults = draw(30000, lines);
  std::array<double, 4> count{};
  std::vector<double> fct;
  std::vector<int> per_line(100, 0);
  std::vector<int> per_loc(101, 0);
  for (const auto& f : faults) {
    count[static_cast<std::size_t>(f.type)] += 1.0;
    fct.push_back(f.t_clear - f.t_apply);
    per_line[static_cast<std::size_t>(f.line)]++;
    per_loc[static_cast<std::size_t>(f.location_pct)]++;
    CHECK(f.t_apply == 1.0);
    CHECK(f.location_pct >= 1);
    CHECK(f.location_pct <= 100);
  }
  const std::array<double, 4> expected = {0.05, 0.10, 0.15, 0.70};
  for (std::size_t t = 0; t < 4; ++t) CHECK(std::abs(count[t] / 30000.0 - expected[t]) < 0.01);
  const auto fit = fit_normal(fct);
  CHECK(std::abs(fit.mean - 0.2) < 0.001);
  CHECK(std::abs(fit.std - 0.005) < 0.0005);
  for (int id : lines) CHECK(per_line[static_cast<std::size_t>(id)] > 0);
  CHECK(per_loc[0] == 0);
}

TEST_CASE("single-line support") {
  const std::vector<int> one = {17};
  for (const auto& f : draw(200, one)) CHECK(f.line == 17);
}

TEST_CASE("truncated clearing time") {
  FaultDistributions d;
  for (const auto& f : draw(30000, std::vector<int>{1}, d))
    CHECK(std::abs(f.t_clear - f.t_apply - d.fct_mean) <= d.fct_truncation * d.fct_std);
}

TEST_CASE("distribution validation") {
  FaultDistributions d;
  d.p_lg = 0.5;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  FaultDistributions wide;
  wide.fct_std = 0.1;
  CHECK_THROWS_AS(wide.validate(), ConfigError);
}

TEST_CASE("sample seeds are distinct and stable") {
  CHECK(sample_seed(1, 0) != sample_seed(1, 1));
  CHECK(sample_seed(1, 0) != sample_seed(2, 0));
  CHECK(sample_seed(20240601, 12345) == sample_seed(20240601, 12345));
}

TEST_CASE("fit_normal examples") {
  const std::vector<double> c(10, 0.36);
  const auto a = fit_normal(c);
  CHECK(a.mean == doctest::Approx(0.36));
  CHECK(a.std == doctest::Approx(0.0));
  const auto b = fit_normal(std::vector<double>{0.0, 1.0});
  CHECK(b.mean == 0.5);
  CHECK(b.std == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(fit_normal(std::vector<double>{1.0}), ConfigError);

  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.36, 0.05);
  std::vector<double> v(30000);
  for (auto& x : v) x = n(rng);
  const auto f = fit_normal(v);
  CHECK(std::abs(f.mean - 0.36) < 0.002);
  CHECK(std::abs(f.std - 0.05) < 0.002);
}

TEST_CASE("convergence checker") {
  auto cp = [](std::size_t n, double a, double v, double f) {
    return Checkpoint{n, a, v, f, std::max({a, v, f})};
  };
  SUBCASE("constant history") {
    std::vector<Checkpoint> h;
    for (std::size_t n = 1000; n <= 10000; n += 1000) h.push_back(cp(n, 0.3, 0.2, 0.1));
    CHECK(convergence_check(h, 5000, 0.005));
  }
  SUBCASE("early drift then a plateau") {
    const std::vector<Checkpoint> h = {cp(1000, 0.33, 0.25, 0.25), cp(5000, 0.35, 0.26, 0.27),
                                       cp(30000, 0.36, 0.27, 0.29), cp(50000, 0.36, 0.27, 0.29)};
    CHECK(convergence_check(h, 5000, 0.005));
    CHECK_FALSE(convergence_check(std::span(h).first(3), 5000, 0.005));
    CHECK_FALSE(convergence_check(std::span(h).first(2), 5000, 0.005));
  }
  SUBCASE("linear drift") {
    std::vector<Checkpoint> h;
    for (std::size_t n = 1000; n <= 50000; n += 1000) h.push_back(cp(n, 0.3 + 1e-6 * n, 0.2, 0.1));
    CHECK_FALSE(convergence_check(h, 5000, 0.005));
  }
  SUBCASE("too little history") {
    const std::vector<Checkpoint> h = {cp(1000, 0.3, 0.2, 0.1)};
    CHECK_FALSE(convergence_check(h, 5000, 0.005));
    CHECK_FALSE(convergence_check({}, 5000, 0.005));
  }
}

TEST_CASE("all-stable evaluator gives zero risk") {
  const auto lines = ieee39().fault_eligible_branches();
  const auto r = run_monte_carlo(lines, {}, small_config(3000),
                                 [](const FaultEvent&) { return SampleOutcome{}; });
  CHECK(r.summary.r_am == 0.0);
  CHECK(r.summary.r_vm == 0.0);
  CHECK(r.summary.r_fm == 0.0);
  CHECK(r.summary.g == 0.0);
  CHECK(r.summary.converged);
}

TEST_CASE("estimator matches exact enumeration") {
  const auto lines = ieee39().fault_eligible_branches();
  const FaultDistributions dist;
  double exact_a = 0.0, exact_v = 0.0, exact_f = 0.0;
  for (int line : lines)
    for (int loc = 1; loc <= 100; ++loc)
      for (auto t : {FaultType::LLL, FaultType::LLG, FaultType::LL, FaultType::LG}) {
        FaultEvent f;
        f.line = line;
        f.location_pct = loc;
        f.type = t;
        const double p = fault_probability(f, lines.size(), dist);
        const auto o = analytic(f);
        exact_a += p * o.sev_a;
        exact_v += p * o.sev_v;
        exact_f += p * o.sev_f;
      }

  const auto r = run_monte_carlo(lines, dist, small_config(10000), analytic);
  REQUIRE(r.summary.n == 10000);
  auto check = [&](double exact, double mean, double SampleRecord::*field) {
    std::vector<double> v;
    for (const auto& s : r.samples) v.push_back(s.*field);
    const double se = fit_normal(v).std / std::sqrt(static_cast<double>(v.size()));
    CHECK(std::abs(mean - exact) < 3.0 * se);
  };
  check(exact_a, r.summary.r_am, &SampleRecord::sev_a);
  check(exact_v, r.summary.r_vm, &SampleRecord::sev_v);
  check(exact_f, r.summary.r_fm, &SampleRecord::sev_f);
  CHECK(r.summary.g == std::max({r.summary.r_am, r.summary.r_vm, r.summary.r_fm}));
}

TEST_CASE("weighted mode on a degenerate distribution") {
  const std::vector<int> one = {5};
  FaultDistributions d;
  d.p_lll = 0.0;
  d.p_llg = 0.0;
  d.p_ll = 0.0;
  d.p_lg = 1.0;
  auto cfg = small_config(1000);
  const auto sampled = run_monte_carlo(one, d, cfg, analytic);
  cfg.mode = RiskMode::Weighted;
  const auto weighted = run_monte_carlo(one, d, cfg, analytic);
  const double pr = 1.0 / 100.0;
  CHECK(weighted.summary.r_am == doctest::Approx(pr * sampled.summary.r_am).epsilon(1e-12));
  CHECK(weighted.summary.r_vm == doctest::Approx(pr * sampled.summary.r_vm).epsilon(1e-12));
  CHECK(weighted.summary.r_fm == doctest::Approx(pr * sampled.summary.r_fm).epsilon(1e-12));
  for (const auto& s : weighted.samples) CHECK(s.pr_fault == doctest::Approx(pr));
}

TEST_CASE("results do not depend on the worker count") {
  const auto lines = ieee39().fault_eligible_branches();
  auto cfg = small_config(3000);
  cfg.workers = 1;
  const auto a = run_monte_carlo(lines, {}, cfg, analytic);
  cfg.workers = 8;
  const auto b = run_monte_carlo(lines, {}, cfg, analytic);
  CHECK(csv(a) == csv(b));
  CHECK(summary_json(a.summary) == summary_json(b.summary));
}

TEST_CASE("running means settle once converged") {
  const auto lines = ieee39().fault_eligible_branches();
  MonteCarloConfig cfg;
  cfg.n_max = 20000;
  cfg.checkpoint_every = 1000;
  cfg.window = 5000;
  cfg.threshold = 0.005;
  cfg.stop_at_convergence = false;
  const auto r = run_monte_carlo(lines, {}, cfg, analytic);
  REQUIRE(r.summary.converged);
  const auto& h = r.summary.history;
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (h[i - 1].n < r.summary.converged_at) continue;
    CHECK(std::abs(h[i].r_am - h[i - 1].r_am) < 0.01);
    CHECK(std::abs(h[i].r_vm - h[i - 1].r_vm) < 0.01);
    CHECK(std::abs(h[i].r_fm - h[i - 1].r_fm) < 0.01);
  }
}

TEST_CASE("early stop at convergence") {
  const auto lines = ieee39().fault_eligible_branches();
  auto cfg = small_config(30000);
  cfg.stop_at_convergence = true;
  const auto r = run_monte_carlo(lines, {}, cfg, analytic);
  CHECK(r.summary.converged);
  CHECK(r.summary.n == r.summary.converged_at);
  CHECK(r.summary.n < 30000);
}

TEST_CASE("failed samples") {
  const auto lines = ieee39().fault_eligible_branches();
  auto cfg = small_config(2000);
  SUBCASE("rare failures are recorded and excluded") {
    cfg.max_failure_rate = 0.01;
    const int victim = lines.front();
    const auto r = run_monte_carlo(lines, {}, cfg, [victim](const FaultEvent& f) {
      if (f.line == victim && f.location_pct <= 10 && f.type == FaultType::LG)
        throw NumericalError("synthetic failure");
      return analytic(f);
    });
    std::size_t failed = 0;
    for (const auto& s : r.samples)
      if (s.termination == "failed") {
        ++failed;
        CHECK(s.failure == "synthetic failure");
      }
    CHECK(failed > 0);
    CHECK(failed == r.summary.failed);
    CHECK(r.summary.n + r.summary.failed == 2000);
  }
  SUBCASE("too many failures abort the run") {
    CHECK_THROWS_AS(run_monte_carlo(lines, {}, cfg,
                                    [](const FaultEvent& f) {
                                      if (f.type == FaultType::LLL) throw NumericalError("boom");
                                      return analytic(f);
                                    }),
                    NumericalError);
  }
  SUBCASE("nothing succeeds") {
    CHECK_THROWS_AS(run_monte_carlo(lines, {}, cfg,
                                    [](const FaultEvent&) -> SampleOutcome {
                                      throw NumericalError("boom");
                                    }),
                    NumericalError);
  }
}

TEST_CASE("monotone risk") {
  const auto lines = ieee39().fault_eligible_branches();
  const auto cfg = small_config(2000);
  const auto a = run_monte_carlo(lines, {}, cfg, analytic);
  const auto b = run_monte_carlo(lines, {}, cfg, [](const FaultEvent& f) {
    auto o = analytic(f);
    o.sev_v += 0.01 * f.location_pct / 100.0;
    return o;
  });
  CHECK(b.summary.r_vm >= a.summary.r_vm);
}

TEST_CASE("exports") {
  const std::vector<double> v = {0.1, 0.2, 0.2, 0.4};
  const auto bins = histogram(v, 3);
  REQUIRE(bins.size() == 3);
  CHECK(bins[0].count + bins[1].count + bins[2].count == 4);
  CHECK(bins[2].count == 1);
  CHECK(histogram(std::vector<double>{0.3, 0.3}, 5).size() == 1);

  const auto lines = ieee39().fault_eligible_branches();
  const auto r = run_monte_carlo(lines, {}, small_config(500), analytic);
  const auto text = csv(r);
  CHECK(text.rfind("sample_id,line,type,location_pct,fct_s,sev_a,sev_v,sev_f,g_sample,termination\n", 0) == 0);
  const auto json = summary_json(r.summary);
  CHECK(json.find("\"R_AM\"") != std::string::npos);
  CHECK(json.find("\"history\"") != std::string::npos);
  CHECK(parse_risk_mode("weighted") == RiskMode::Weighted);
  CHECK_THROWS_AS(parse_risk_mode("other"), ConfigError);
}
