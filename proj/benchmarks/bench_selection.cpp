#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "apsign/simulator.hpp"

namespace {

apsign::sim::ChunkedClip clip(std::size_t n) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::sin(static_cast<double>(i) * 0.37);
  return apsign::sim::ChunkedClip::from_scores("c", s);
}

void BM_SelectChunks(benchmark::State& state) {
  const auto c = clip(apsign::sim::kMaxChunks);
  apsign::sim::Selector sel;
  sel.kind = static_cast<apsign::sim::SelectorKind>(state.range(0));
  sel.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(apsign::sim::select_chunks(c, sel, 0.2));
}
BENCHMARK(BM_SelectChunks)->DenseRange(0, 2)->ArgName("selector");

void BM_PermuteQueryStream(benchmark::State& state) {
  std::map<std::string, std::string> assignment;
  for (int i = 0; i < state.range(0); ++i) assignment["q" + std::to_string(i)] = "F" + std::to_string(i % 7);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        apsign::sim::permute_query_stream(assignment, apsign::sim::PermutationMode::within_family, ++seed));
  }
}
BENCHMARK(BM_PermuteQueryStream)->Arg(200)->Arg(5000);

}  // namespace
