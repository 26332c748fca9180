#pragma once

// Point estimators of compression damage at a single budget.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apsign/records.hpp"

namespace apsign {

struct FamilyStat {
  double mean = 0.0;
  std::size_t count = 0;
  bool inconclusive = false;
};

struct WorstFamily {
  std::string family;
  double value = 0.0;
};

struct ExcessSummary {
  double budget = 1.0;
  double avg_excess = 0.0;
  std::map<std::string, FamilyStat> per_family;
  // Empty when every family is inconclusive; hidden_damage is then NaN.
  std::optional<WorstFamily> worst_family;
  double hidden_damage = 0.0;
  bool all_inconclusive = false;
};

/// Columnar view of a partitioned dataset, shared by the estimators and the
/// bootstrap so that replicates never copy pairs.
class FamilyTable {
 public:
  FamilyTable() = default;
  /// Requires every pair to carry a label under `partition`; an empty name
  /// puts every pair in a single family.
  FamilyTable(const PairedDataset& ds, std::string_view partition);

  std::size_t size() const noexcept { return excess_.size(); }
  const std::vector<std::string>& families() const noexcept { return names_; }
  bool eligible(std::size_t family) const { return eligible_[family] != 0; }
  std::int32_t family_of(std::size_t pair) const { return family_[pair]; }
  double excess(std::size_t pair) const { return excess_[pair]; }

  double avg() const;
  double avg(std::span<const std::uint32_t> draw) const;

  /// Max family mean over eligible families present in the draw; ties go to
  /// the lexicographically smallest name. Returns NaN when no family qualifies.
  double worst() const;
  double worst(std::span<const std::uint32_t> draw) const;
  /// As worst(), restricted to families whose mask entry is non-zero.
  double worst(std::span<const std::uint32_t> draw, std::span<const char> mask) const;

  /// Per-family (sum, count) over the draw.
  void accumulate(std::span<const std::uint32_t> draw, std::vector<double>& sums,
                  std::vector<std::size_t>& counts) const;

 private:
  std::vector<double> excess_;
  std::vector<std::int32_t> family_;
  std::vector<std::string> names_;  // sorted
  std::vector<char> eligible_;
};

double avg_excess(const PairedDataset& ds);

/// `ds` must already carry `partition` (see apply_partition).
ExcessSummary family_excess_table(const PairedDataset& ds, std::string_view partition);
ExcessSummary family_excess_table(const PairedDataset& ds, const PartitionSpec& spec);

/// Worst-family excess minus the pooled mean; NaN when no family qualifies.
double hidden_damage(const PairedDataset& ds, std::string_view partition);

/// Share of positive family excess carried by the two largest positive families.
std::optional<double> worst2_concentration(const ExcessSummary& summary);
std::optional<double> worst2_concentration(const PairedDataset& ds, std::string_view partition);

/// max_F (risk_a[F] - risk_b[F]) and its argmax; both maps need the same keys.
std::pair<std::string, double> architecture_gap(const std::map<std::string, double>& risk_a,
                                                const std::map<std::string, double>& risk_b);

}  // namespace apsign
