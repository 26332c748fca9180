#include "apsign/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "apsign/error.hpp"

namespace apsign {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_nonempty(const PairedDataset& ds) {
  if (ds.empty()) fail(ErrorCode::EmptyDataset, "dataset has no pairs");
}

}  // namespace

FamilyTable::FamilyTable(const PairedDataset& ds, std::string_view partition) {
  require_nonempty(ds);
  const std::string key(partition);
  const ResolvedPartition* resolved = ds.partition(partition);

  // An empty partition name treats the whole dataset as one family.
  if (key.empty()) {
    names_.push_back("all");
    eligible_.push_back(1);
    for (const auto& p : ds.pairs) {
      excess_.push_back(p.excess());
      family_.push_back(0);
    }
    return;
  }

  std::map<std::string, std::int32_t> index;
  for (const auto& p : ds.pairs) {
    auto it = p.families.find(key);
    if (it == p.families.end()) {
      fail(ErrorCode::UnassignedExample,
           "example '" + p.example_id + "' has no family in partition '" + key + "'");
    }
    index.emplace(it->second, 0);
  }
  for (auto& [name, idx] : index) {
    idx = static_cast<std::int32_t>(names_.size());
    names_.push_back(name);
    eligible_.push_back(resolved && resolved->inconclusive.count(name) ? 0 : 1);
  }
  excess_.reserve(ds.size());
  family_.reserve(ds.size());
  for (const auto& p : ds.pairs) {
    excess_.push_back(p.excess());
    family_.push_back(index.at(p.families.at(key)));
  }
}

double FamilyTable::avg() const {
  return std::accumulate(excess_.begin(), excess_.end(), 0.0) / static_cast<double>(size());
}

double FamilyTable::avg(std::span<const std::uint32_t> draw) const {
  double s = 0.0;
  for (auto i : draw) s += excess_[i];
  return s / static_cast<double>(draw.size());
}

void FamilyTable::accumulate(std::span<const std::uint32_t> draw, std::vector<double>& sums,
                             std::vector<std::size_t>& counts) const {
  sums.assign(names_.size(), 0.0);
  counts.assign(names_.size(), 0);
  for (auto i : draw) {
    sums[family_[i]] += excess_[i];
    ++counts[family_[i]];
  }
}

double FamilyTable::worst() const {
  std::vector<std::uint32_t> all(size());
  std::iota(all.begin(), all.end(), 0U);
  return worst(all);
}

double FamilyTable::worst(std::span<const std::uint32_t> draw) const {
  return worst(draw, std::span<const char>(eligible_));
}

double FamilyTable::worst(std::span<const std::uint32_t> draw, std::span<const char> mask) const {
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  accumulate(draw, sums, counts);
  double best = kNaN;
  for (std::size_t f = 0; f < names_.size(); ++f) {
    if (!mask[f] || !eligible_[f] || counts[f] == 0) continue;
    double m = sums[f] / static_cast<double>(counts[f]);
    if (std::isnan(best) || m > best) best = m;
  }
  return best;
}

double avg_excess(const PairedDataset& ds) {
  require_nonempty(ds);
  double s = 0.0;
  for (const auto& p : ds.pairs) s += p.excess();
  return s / static_cast<double>(ds.size());
}

ExcessSummary family_excess_table(const PairedDataset& ds, std::string_view partition) {
  FamilyTable table(ds, partition);
  ExcessSummary out;
  out.budget = ds.budget;
  out.avg_excess = table.avg();

  std::vector<std::uint32_t> all(table.size());
  std::iota(all.begin(), all.end(), 0U);
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  table.accumulate(all, sums, counts);

  const auto& names = table.families();
  for (std::size_t f = 0; f < names.size(); ++f) {
    FamilyStat st{sums[f] / static_cast<double>(counts[f]), counts[f], !table.eligible(f)};
    out.per_family.emplace(names[f], st);
    if (st.inconclusive) continue;
    if (!out.worst_family || st.mean > out.worst_family->value) {
      out.worst_family = WorstFamily{names[f], st.mean};
    }
  }

  if (const ResolvedPartition* rp = ds.partition(partition)) {
    for (const auto& fam : rp->declared) {
      if (out.per_family.count(fam) || rp->merged_into.count(fam)) continue;
      fail(ErrorCode::EmptyFamily, "declared family '" + fam + "' of partition '" +
                                       std::string(partition) + "' has no pairs");
    }
  }

  out.all_inconclusive = !out.worst_family.has_value();
  out.hidden_damage = out.worst_family ? out.worst_family->value - out.avg_excess : kNaN;
  return out;
}

ExcessSummary family_excess_table(const PairedDataset& ds, const PartitionSpec& spec) {
  if (ds.partition(spec.name)) return family_excess_table(ds, spec.name);
  return family_excess_table(apply_partition(ds, spec), spec.name);
}

double hidden_damage(const PairedDataset& ds, std::string_view partition) {
  return family_excess_table(ds, partition).hidden_damage;
}

std::optional<double> worst2_concentration(const ExcessSummary& summary) {
  std::vector<double> positive;
  for (const auto& [name, st] : summary.per_family) {
    if (!st.inconclusive && st.count > 0 && st.mean > 0.0) positive.push_back(st.mean);
  }
  double total = std::accumulate(positive.begin(), positive.end(), 0.0);
  if (!(total > 0.0)) return std::nullopt;
  std::sort(positive.begin(), positive.end(), std::greater<>());
  double top = positive[0] + (positive.size() > 1 ? positive[1] : 0.0);
  return std::min(1.0, top / total);
}

std::optional<double> worst2_concentration(const PairedDataset& ds, std::string_view partition) {
  return worst2_concentration(family_excess_table(ds, partition));
}

std::pair<std::string, double> architecture_gap(const std::map<std::string, double>& risk_a,
                                                const std::map<std::string, double>& risk_b) {
  if (risk_a.size() != risk_b.size()) {
    fail(ErrorCode::KeyMismatch, "risk maps have different family sets");
  }
  if (risk_a.empty()) fail(ErrorCode::KeyMismatch, "risk maps are empty");
  std::optional<std::pair<std::string, double>> best;
  for (const auto& [fam, a] : risk_a) {
    auto it = risk_b.find(fam);
    if (it == risk_b.end()) fail(ErrorCode::KeyMismatch, "family '" + fam + "' missing from second map");
    double gap = a - it->second;
    if (!best || gap > best->second) best = std::make_pair(fam, gap);
  }
  return *best;
}

}  // namespace apsign
