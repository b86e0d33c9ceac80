// Serial reference kernels vs their OpenMP versions.
//   vfest_bench --benchmark_filter=EStep
// Set OMP_NUM_THREADS to control the parallel worker count.

#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "vfest/intervals.hpp"
#include "vfest/kernels.hpp"
#include "vfest/mixture_em.hpp"
#include "vfest/simulate.hpp"

using namespace vfest;

namespace {

struct EStepProblem {
  std::vector<double> y1, y2, mu, h, log_pi;

  explicit EStepProblem(std::size_t n) {
    const auto theta = VarianceModel::exp_linear(5.0, -1.0);
    Scenario s;
    s.n = n;
    const PairedDataset data = generate_dataset(s, theta);
    for (const auto& p : data.pairs()) {
      y1.push_back(p.y1);
      y2.push_back(p.y2);
    }
    mu = build_support(theta, 8.0, 12.0, 0.25).points;
    for (double m : mu) {
      h.push_back(theta(m));
      log_pi.push_back(-std::log(static_cast<double>(mu.size())));
    }
  }
  kernels::EStepInput input() const { return {y1, y2, mu, h, log_pi}; }
};

void BM_EStepSerial(benchmark::State& state) {
  const EStepProblem p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::estep_serial(p.input()).log_lik);
  state.counters["J"] = static_cast<double>(p.mu.size());
}

void BM_EStepParallel(benchmark::State& state) {
  const EStepProblem p(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kernels::estep_parallel(p.input()).log_lik);
  state.counters["J"] = static_cast<double>(p.mu.size());
}

void BM_RegionSerial(benchmark::State& state) {
  const auto theta = VarianceModel::exp_linear(4.84, -0.927);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ci_diff_region(13.62, 11.89, theta, 0.05, Bounds{}, 0.005, false));
  }
}

void BM_RegionParallel(benchmark::State& state) {
  const auto theta = VarianceModel::exp_linear(4.84, -0.927);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ci_diff_region(13.62, 11.89, theta, 0.05, Bounds{}, 0.005, true));
  }
}

}  // namespace

BENCHMARK(BM_EStepSerial)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EStepParallel)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegionSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RegionParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
