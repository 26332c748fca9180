#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "apsign/estimators.hpp"
#include "apsign/records.hpp"
#include "apsign/resampling.hpp"

namespace {

apsign::PairedDataset make_dataset(std::size_t n, std::size_t families) {
  std::mt19937_64 rng(1);
  std::vector<apsign::EvalRecord> recs;
  for (std::size_t i = 0; i < n; ++i) {
    apsign::EvalRecord raw;
    raw.example_id = "e" + std::to_string(100000 + i);
    raw.dataset = "d";
    raw.method = "raw";
    raw.backbone = "m";
    raw.loss = static_cast<double>(rng() % 2);
    raw.family_labels["f"] = "F" + std::to_string(rng() % families);
    auto comp = raw;
    comp.method = "m";
    comp.budget = apsign::Budget::fraction(0.2);
    comp.loss = static_cast<double>(rng() % 2);
    recs.push_back(std::move(raw));
    recs.push_back(std::move(comp));
  }
  apsign::PairingRequest req;
  req.method = "m";
  req.budget = 0.2;
  auto ds = apsign::pair_with_reference(recs, req);
  return apsign::apply_partition(std::move(ds), apsign::partition_from_labels(recs, "f", 1));
}

void BM_BootstrapWorstFamily(benchmark::State& state) {
  const auto ds = make_dataset(static_cast<std::size_t>(state.range(0)), 20);
  const apsign::FamilyTable table(ds, "f");
  apsign::BootstrapConfig cfg;
  cfg.n_boot = 1000;
  cfg.workers = 1;
  for (auto _ : state) {
    auto ci = apsign::bootstrap_ci(
        table.size(), [&table](std::span<const std::uint32_t> d) { return table.worst(d); }, cfg);
    benchmark::DoNotOptimize(ci);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.n_boot));
}
BENCHMARK(BM_BootstrapWorstFamily)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_FamilyExcessTable(benchmark::State& state) {
  const auto ds = make_dataset(static_cast<std::size_t>(state.range(0)), 20);
  for (auto _ : state) benchmark::DoNotOptimize(apsign::family_excess_table(ds, "f"));
}
BENCHMARK(BM_FamilyExcessTable)->Arg(1000)->Arg(20000);

}  // namespace
