#pragma once

// End-to-end sign-off: ingest, pair, partition, estimate, bootstrap, build
// frontiers, decide, and optionally test conditioned gains and audit query use.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apsign/estimators.hpp"
#include "apsign/frontiers.hpp"
#include "apsign/records.hpp"
#include "apsign/resampling.hpp"

namespace apsign {

inline constexpr std::string_view kVersion = "0.1.0";

struct PartitionEntry {
  PartitionSpec spec;
  bool from_labels = false;  // build the assignment from record labels named spec.name
};

struct GainPairSpec {
  std::string agnostic;
  std::string conditioned;
  Variant variant = Variant::fam;
  // Defaults to the conditioned method name + ".naive" when such records exist.
  std::optional<std::string> naive_method;
};

struct AuditConfig {
  bool enabled = true;
  double epsilon = 0.05;
  AuditThresholds thresholds;
};

struct SignoffConfig {
  std::vector<std::filesystem::path> records;
  std::string reference_method = "raw";
  std::vector<std::string> methods;  // empty: every non-reference method in the records
  std::optional<std::string> dataset;
  std::optional<std::string> backbone;
  std::optional<std::string> reference_backbone;
  std::vector<PartitionEntry> partitions;
  std::string deployment_partition;
  BudgetGrid grid = BudgetGrid::main_grid();
  std::vector<double> epsilons = {0.01, 0.02, 0.05};
  double eps_avg = 0.05;
  double eps_fam = 0.05;
  BootstrapConfig bootstrap;
  LossSpec loss;
  UnpairedPolicy unpaired = UnpairedPolicy::error;
  std::vector<GainPairSpec> gains;
  AuditConfig audit;
  std::filesystem::path output = "signoff_out";

  /// Relative record and partition paths resolve against `base_dir`.
  static SignoffConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static SignoffConfig load(const std::filesystem::path& path);
  /// Canonical JSON (stable key order); the provenance hash is taken over it.
  std::string to_json() const;
  void validate() const;
};

struct BudgetCell {
  double budget = 0.0;
  std::size_t n_pairs = 0;
  std::size_t n_dropped = 0;
  std::map<std::string, ExcessSummary> summaries;  // partition -> summary
  IntervalEstimate avg;
  IntervalEstimate fam;  // deployment partition
  std::optional<double> w2;
  DecisionReport decision;
};

struct FrontierRow {
  double epsilon = 0.0;
  FrontierResult avg_point;
  FrontierResult avg_certified;
  FrontierResult fam_point;
  FrontierResult fam_certified;
  std::map<std::string, double> family_point;  // deployment-partition family -> budget
};

struct RunReport {
  std::string method;
  std::optional<std::int64_t> seed;
  std::vector<BudgetCell> cells;
  ExcessCurve avg_curve;
  ExcessCurve fam_curve;
  std::vector<FrontierRow> frontiers;
  std::optional<double> recommended_budget;  // smallest accepted budget
  std::vector<std::string> failing_families;  // infeasible at eps_fam on the point curve
};

struct GainSeedRow {
  std::optional<std::int64_t> seed;
  std::vector<GainResult> per_epsilon;
  std::vector<std::optional<GainTest>> tests;  // per epsilon
};

struct GainReport {
  GainPairSpec pair;
  std::vector<GainSeedRow> seeds;
  // Across-seed Student-t interval per epsilon, when >= 2 seeds give finite gains.
  std::vector<std::optional<IntervalEstimate>> across_seeds;
};

struct AuditSeedRow {
  std::optional<std::int64_t> seed;
  std::optional<AuditResult> decoupled;
  std::optional<AuditResult> naive;
  std::vector<std::string> notes;
};

struct AuditReport {
  GainPairSpec pair;
  double epsilon = 0.05;
  std::vector<AuditSeedRow> seeds;
  std::optional<double> mean_delta;
  std::optional<double> sd_delta;
  std::optional<Band> band;
  std::optional<double> mean_naive_delta;
};

struct SignoffReport {
  std::string config_hash;
  std::string input_hash;
  std::uint64_t seed = 0;
  std::string version = std::string(kVersion);
  std::string deployment_partition;
  BudgetGrid grid;
  std::vector<double> epsilons;
  double eps_avg = 0.0;
  double eps_fam = 0.0;
  std::vector<RunReport> runs;
  std::vector<GainReport> gains;
  std::vector<AuditReport> audits;

  std::string to_json() const;
  std::string summary_text() const;
};

SignoffReport run_signoff(const SignoffConfig& cfg);
/// Same as above on records already in memory; input_hash covers their serialization.
SignoffReport run_signoff(const SignoffConfig& cfg, const std::vector<EvalRecord>& records);

/// curves.csv, frontiers.csv, family_frontiers.csv and gains.csv under `dir`.
void export_curves(const SignoffReport& report, const std::filesystem::path& dir);

}  // namespace apsign
