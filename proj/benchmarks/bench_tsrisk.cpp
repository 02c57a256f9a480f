#include <benchmark/benchmark.h>

#include <random>

#include "tsrisk/case_io.hpp"
#include "tsrisk/powerflow.hpp"
#include "tsrisk/riskmc.hpp"
#include "tsrisk/scenario.hpp"
#include "tsrisk/simulation.hpp"
#include "tsrisk/ybus.hpp"

namespace {

const tsrisk::PowerSystemCase& ieee39() {
  static const auto c = tsrisk::load_case(TSRISK_BENCH_CASE);
  return c;
}

tsrisk::FaultEvent fault_16_17(tsrisk::FaultType type) {
  tsrisk::FaultEvent f;
  f.line = *ieee39().find_branch_between(16, 17);
  f.type = type;
  f.location_pct = 50;
  f.t_apply = 1.0;
  f.t_clear = 1.2;
  return f;
}

void BM_BuildYbus(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tsrisk::build_ybus(ieee39()));
}

void BM_PowerFlow(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tsrisk::solve_power_flow(ieee39()));
}

void BM_ModelInit(benchmark::State& state) {
  const auto pf = tsrisk::solve_power_flow(ieee39());
  for (auto _ : state) {
    tsrisk::DynamicModel m(ieee39(), pf);
    benchmark::DoNotOptimize(m.initial_residual());
  }
}

// Range argument is the wind penetration level in percent.
void BM_Simulate(benchmark::State& state) {
  const auto c = tsrisk::apply_wind_penetration(
      ieee39(), tsrisk::replacement_set(static_cast<int>(state.range(0))));
  const tsrisk::DynamicModel m(c, tsrisk::solve_power_flow(c));
  const auto f = fault_16_17(tsrisk::FaultType::LG);
  for (auto _ : state) {
    auto t = m.run(f);
    benchmark::DoNotOptimize(t.time.data());
  }
}

void BM_SampleFaults(benchmark::State& state) {
  const auto lines = ieee39().fault_eligible_branches();
  const tsrisk::FaultDistributions dist;
  std::uint64_t i = 0;
  for (auto _ : state) {
    std::mt19937_64 rng(tsrisk::sample_seed(20240601, i++));
    benchmark::DoNotOptimize(tsrisk::sample_fault(rng, lines, dist));
  }
}

}  // namespace

BENCHMARK(BM_BuildYbus);
BENCHMARK(BM_PowerFlow);
BENCHMARK(BM_ModelInit);
BENCHMARK(BM_Simulate)->Arg(0)->Arg(25)->Arg(80)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleFaults);
BENCHMARK_MAIN();
