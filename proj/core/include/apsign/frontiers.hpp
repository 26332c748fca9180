#pragma once

// Budget frontiers, conditioned gains, chain analyses, the decoupled audit and
// the deployment decision rule.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apsign/estimators.hpp"
#include "apsign/records.hpp"
#include "apsign/resampling.hpp"

namespace apsign {

enum class Variant { avg, fam };

std::string_view to_string(Variant v) noexcept;

struct CurvePoint {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ExcessCurve {
  BudgetGrid grid;
  std::vector<CurvePoint> values;  // one per grid budget
  Variant variant = Variant::avg;
  std::string partition;  // set for the fam variant

  void validate() const;
};

/// Bootstraps each budget's dataset (aligned with `grid`) and collects the
/// chosen estimator with its percentile endpoints.
ExcessCurve build_curve(std::span<const PairedDataset> per_budget, const BudgetGrid& grid,
                        Variant variant, std::string_view partition, const BootstrapConfig& cfg);

/// Point-only curve (lo = hi = point), used where no bootstrap is needed.
ExcessCurve point_curve(const BudgetGrid& grid, std::span<const double> values, Variant variant,
                        std::string_view partition = {});

enum class FrontierKind { point, certified, interpolated };

std::string_view to_string(FrontierKind k) noexcept;

/// budget is +inf when no grid budget satisfies the predicate.
struct FrontierResult {
  double epsilon = 0.0;
  double budget = 0.0;
  FrontierKind kind = FrontierKind::point;

  bool feasible() const noexcept;
  std::string budget_text() const;  // "INFEASIBLE" or the budget
};

FrontierResult point_frontier(const ExcessCurve& curve, double eps);
FrontierResult certified_frontier(const ExcessCurve& curve, double eps);
/// Diagnostic only: linear interpolation of the point curve at its first
/// crossing of eps. Never used for sign-off.
FrontierResult interpolated_frontier(const ExcessCurve& curve, double eps);

/// Smallest grid budget whose value is <= eps; +inf when none.
double grid_frontier(const BudgetGrid& grid, std::span<const double> values, double eps);

struct GainResult {
  double gain = 0.0;  // +-inf when exactly one side is infeasible
  FrontierResult agnostic;
  FrontierResult conditioned;
  bool both_infeasible = false;
  bool one_infeasible = false;
};

GainResult conditioned_gain(const ExcessCurve& agnostic, const ExcessCurve& conditioned, double eps);

/// Gain from raw frontier budgets under the same infeasibility conventions.
double gain_from_frontiers(double agnostic_budget, double conditioned_budget) noexcept;

/// Bootstrap statistic for the point-frontier gain. Both table lists are aligned
/// with `grid` and share one example universe.
IndexStatistic conditioned_gain_statistic(std::vector<FamilyTable> agnostic,
                                          std::vector<FamilyTable> conditioned,
                                          const BudgetGrid& grid, Variant variant, double eps);

enum class Outcome { accept, reject, inconclusive };

std::string_view to_string(Outcome o) noexcept;

struct DecisionReport {
  double budget = 0.0;
  double eps_avg = 0.0;
  double eps_fam = 0.0;
  IntervalEstimate avg;
  IntervalEstimate fam;
  Outcome outcome = Outcome::inconclusive;
  std::string worst_family;
  double hidden_damage = 0.0;
  std::vector<std::string> notes;
};

DecisionReport signoff_decision(const IntervalEstimate& avg, const IntervalEstimate& fam,
                                double eps_avg, double eps_fam, double budget = 0.0);

struct ChainStep {
  std::vector<std::string> families;
  FrontierResult frontier;
  std::optional<double> increment;  // empty for the first step or when infeasible
};

/// Worst-family frontier over growing prefixes of `ordering`. Each dataset in
/// `per_budget` must carry `partition`.
std::vector<ChainStep> cumulative_chain(std::span<const PairedDataset> per_budget,
                                        const BudgetGrid& grid, std::string_view partition,
                                        std::span<const std::string> ordering, double eps);

/// Families of `partition` sorted by increasing pair count, ties by name.
std::vector<std::string> order_by_count(const PairedDataset& ds, std::string_view partition);

/// union / (a + b); empty when any input is infeasible or the denominator is 0.
std::optional<double> additivity_ratio(double frontier_a, double frontier_b, double frontier_union);

enum class Band { PHI1, PHI2, PHI3 };

std::string_view to_string(Band b) noexcept;

struct AuditThresholds {
  double phi1 = 0.01;  // |delta| <= phi1
  double phi2 = 0.05;  // |delta| < phi2
};

inline constexpr std::size_t kMaxPermutations = 10;

struct AuditResult {
  double anchor = 0.0;
  double permuted_mean = 0.0;
  double delta = 0.0;
  Band band = Band::PHI1;
  std::size_t n_permutations = 0;
};

Band audit_band(double delta, const AuditThresholds& t = {});
AuditResult decoupled_audit(double anchor_gain, std::span<const double> permuted_gains,
                            const AuditThresholds& t = {});

}  // namespace apsign
