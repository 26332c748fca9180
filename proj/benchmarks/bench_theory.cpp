#include <benchmark/benchmark.h>

#include <vector>

#include "apsign/theory.hpp"

namespace {

using namespace apsign::theory;

void BM_Waterfill(benchmark::State& state) {
  const std::size_t m = static_cast<std::size_t>(state.range(0));
  std::vector<double> var(m), alpha(m);
  for (std::size_t j = 0; j < m; ++j) {
    var[j] = 1.0 + 0.1 * static_cast<double>(j);
    alpha[j] = 1.0 / (1.0 + static_cast<double>(j));
  }
  for (auto _ : state) benchmark::DoNotOptimize(waterfill_single_query(var, alpha, 0.3));
}
BENCHMARK(BM_Waterfill)->Arg(6)->Arg(64);

void BM_GaussianFamily(benchmark::State& state) {
  const auto spec = synergy_spec(true);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_family_frontier(spec, 0.1));
}
BENCHMARK(BM_GaussianFamily);

void BM_EnumerateSeparation(benchmark::State& state) {
  FactorSpec spec{DiscreteDistribution::uniform(16), DiscreteDistribution::uniform(16), 0.5, 2};
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_separation(spec));
}
BENCHMARK(BM_EnumerateSeparation)->Unit(benchmark::kMicrosecond);

void BM_FiniteTwoFactor(benchmark::State& state) {
  const auto task = two_factor_task(2, 2, 2, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(finite_alphabet_frontier(task));
}
BENCHMARK(BM_FiniteTwoFactor)->Unit(benchmark::kMillisecond);

}  // namespace
