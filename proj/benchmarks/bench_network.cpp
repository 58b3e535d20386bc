#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "opnn/gradient.hpp"
#include "opnn/initialization.hpp"
#include "opnn/network.hpp"

namespace {

opnn::Dataset random_data(std::size_t d, std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(n * d), ys(n);
  for (double& v : xs) v = u(rng);
  for (double& v : ys) v = u(rng);
  return {d, xs, ys};
}

opnn::WeightVector trained_like(const opnn::Architecture& arch, std::size_t n) {
  opnn::Rng rng = opnn::make_rng(opnn::RngSeed{3}, 2);
  opnn::WeightVector w = opnn::init_weights(arch, n, 0.5, rng);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (double& o : w.outer_block()) o = u(rng);  // nonzero so the inner gradient is exercised
  return w;
}

void BM_EmpiricalRisk(benchmark::State& state) {
  const std::size_t K = static_cast<std::size_t>(state.range(0)), n = 200;
  const opnn::Architecture arch{1, 2, 2, K};
  const opnn::WeightVector w = trained_like(arch, n);
  const opnn::Dataset data = random_data(1, n);
  for (auto _ : state) benchmark::DoNotOptimize(opnn::empirical_risk(w, data));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * K));
}
BENCHMARK(BM_EmpiricalRisk)->RangeMultiplier(4)->Range(16, 1024);

void BM_GradRisk(benchmark::State& state) {
  const std::size_t K = static_cast<std::size_t>(state.range(0)), n = 200;
  const opnn::Architecture arch{1, 2, 2, K};
  const opnn::WeightVector w = trained_like(arch, n);
  const opnn::Dataset data = random_data(1, n);
  for (auto _ : state) benchmark::DoNotOptimize(opnn::grad_risk(w, data));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * K));
}
BENCHMARK(BM_GradRisk)->RangeMultiplier(4)->Range(16, 1024);

void BM_GradRiskDeep(benchmark::State& state) {
  const std::size_t L = static_cast<std::size_t>(state.range(0)), n = 200;
  const opnn::Architecture arch{3, L, 6, 64};
  const opnn::WeightVector w = trained_like(arch, n);
  const opnn::Dataset data = random_data(3, n);
  for (auto _ : state) benchmark::DoNotOptimize(opnn::grad_risk(w, data));
}
BENCHMARK(BM_GradRiskDeep)->DenseRange(2, 5);

}  // namespace
BENCHMARK_MAIN();
