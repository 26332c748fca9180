#include "apsign/frontiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// NaN (no qualifying family) never satisfies a tolerance.
bool within(double v, double eps) { return v <= eps; }

}  // namespace

std::string_view to_string(Variant v) noexcept { return v == Variant::avg ? "avg" : "fam"; }

std::string_view to_string(FrontierKind k) noexcept {
  switch (k) {
    case FrontierKind::point: return "point";
    case FrontierKind::certified: return "certified";
    case FrontierKind::interpolated: return "interpolated";
  }
  return "point";
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::accept: return "accept";
    case Outcome::reject: return "reject";
    case Outcome::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

std::string_view to_string(Band b) noexcept {
  switch (b) {
    case Band::PHI1: return "PHI1";
    case Band::PHI2: return "PHI2";
    case Band::PHI3: return "PHI3";
  }
  return "PHI1";
}

void ExcessCurve::validate() const {
  if (grid.empty()) fail(ErrorCode::InvalidArgument, "curve has an empty grid");
  if (values.size() != grid.size()) {
    fail(ErrorCode::GridMismatch, "curve has " + std::to_string(values.size()) +
                                      " values for a grid of " + std::to_string(grid.size()));
  }
  for (const auto& v : values) {
    if (v.lo > v.hi) fail(ErrorCode::InvalidArgument, "curve interval with lo > hi");
  }
}

ExcessCurve build_curve(std::span<const PairedDataset> per_budget, const BudgetGrid& grid,
                        Variant variant, std::string_view partition, const BootstrapConfig& cfg) {
  if (per_budget.size() != grid.size()) {
    fail(ErrorCode::GridMismatch, "need one dataset per grid budget");
  }
  ExcessCurve curve;
  curve.grid = grid;
  curve.variant = variant;
  curve.partition = variant == Variant::fam ? std::string(partition) : std::string();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& ds = per_budget[i];
    if (std::abs(ds.budget - grid[i]) > kBudgetTolerance) {
      fail(ErrorCode::GridMismatch, "dataset budget " + format_double(ds.budget) +
                                        " does not match grid budget " + format_double(grid[i]));
    }
    FamilyTable table(ds, curve.partition);
    IndexStatistic stat;
    if (variant == Variant::avg) {
      stat = [&table](std::span<const std::uint32_t> d) { return table.avg(d); };
    } else {
      stat = [&table](std::span<const std::uint32_t> d) { return table.worst(d); };
    }
    std::vector<std::uint32_t> identity(table.size());
    std::iota(identity.begin(), identity.end(), 0U);
    const double point = stat(identity);
    if (std::isnan(point)) {
      curve.values.push_back({kNaN, kNaN, kNaN});
      continue;
    }
    auto est = percentile_interval(point, bootstrap_replicates(table.size(), stat, cfg), cfg);
    curve.values.push_back({est.point, est.lo, est.hi});
  }
  return curve;
}

ExcessCurve point_curve(const BudgetGrid& grid, std::span<const double> values, Variant variant,
                        std::string_view partition) {
  if (values.size() != grid.size()) fail(ErrorCode::GridMismatch, "values do not match grid");
  ExcessCurve c;
  c.grid = grid;
  c.variant = variant;
  c.partition = std::string(partition);
  for (double v : values) c.values.push_back({v, v, v});
  return c;
}

bool FrontierResult::feasible() const noexcept { return std::isfinite(budget); }

std::string FrontierResult::budget_text() const {
  return feasible() ? format_double(budget) : std::string("INFEASIBLE");
}

double grid_frontier(const BudgetGrid& grid, std::span<const double> values, double eps) {
  if (values.size() != grid.size()) fail(ErrorCode::GridMismatch, "values do not match grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (within(values[i], eps)) return grid[i];
  }
  return kInf;
}

FrontierResult point_frontier(const ExcessCurve& curve, double eps) {
  curve.validate();
  std::vector<double> v;
  for (const auto& p : curve.values) v.push_back(p.point);
  return {eps, grid_frontier(curve.grid, v, eps), FrontierKind::point};
}

FrontierResult certified_frontier(const ExcessCurve& curve, double eps) {
  curve.validate();
  std::vector<double> v;
  // A skewed interval can exclude the point; never certify below it.
  for (const auto& p : curve.values) v.push_back(std::isnan(p.hi) ? p.hi : std::max(p.point, p.hi));
  return {eps, grid_frontier(curve.grid, v, eps), FrontierKind::certified};
}

FrontierResult interpolated_frontier(const ExcessCurve& curve, double eps) {
  curve.validate();
  FrontierResult out{eps, kInf, FrontierKind::interpolated};
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    const double v = curve.values[i].point;
    if (!within(v, eps)) continue;
    if (i == 0) {
      out.budget = curve.grid[0];
      return out;
    }
    const double v0 = curve.values[i - 1].point;
    const double b0 = curve.grid[i - 1];
    const double b1 = curve.grid[i];
    if (!std::isfinite(v0) || v0 == v) {
      out.budget = b1;
    } else {
      out.budget = b0 + (v0 - eps) / (v0 - v) * (b1 - b0);
    }
    return out;
  }
  return out;
}

double gain_from_frontiers(double agnostic_budget, double conditioned_budget) noexcept {
  const bool a_inf = !std::isfinite(agnostic_budget);
  const bool c_inf = !std::isfinite(conditioned_budget);
  if (a_inf && c_inf) return 0.0;
  if (a_inf) return kInf;
  if (c_inf) return -kInf;
  return agnostic_budget - conditioned_budget;
}

GainResult conditioned_gain(const ExcessCurve& agnostic, const ExcessCurve& conditioned, double eps) {
  if (!(agnostic.grid == conditioned.grid)) {
    fail(ErrorCode::GridMismatch, "conditioned gain needs curves on the same grid");
  }
  if (agnostic.variant != conditioned.variant || agnostic.partition != conditioned.partition) {
    fail(ErrorCode::InvalidArgument, "conditioned gain needs curves of the same variant");
  }
  GainResult g;
  g.agnostic = point_frontier(agnostic, eps);
  g.conditioned = point_frontier(conditioned, eps);
  g.both_infeasible = !g.agnostic.feasible() && !g.conditioned.feasible();
  g.one_infeasible = g.agnostic.feasible() != g.conditioned.feasible();
  g.gain = gain_from_frontiers(g.agnostic.budget, g.conditioned.budget);
  return g;
}

IndexStatistic conditioned_gain_statistic(std::vector<FamilyTable> agnostic,
                                          std::vector<FamilyTable> conditioned,
                                          const BudgetGrid& grid, Variant variant, double eps) {
  if (agnostic.size() != grid.size() || conditioned.size() != grid.size()) {
    fail(ErrorCode::GridMismatch, "need one table per grid budget for both methods");
  }
  return [agn = std::move(agnostic), cond = std::move(conditioned), grid, variant,
          eps](std::span<const std::uint32_t> draw) {
    auto frontier = [&](const std::vector<FamilyTable>& tables) {
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = variant == Variant::avg ? tables[i].avg(draw) : tables[i].worst(draw);
        if (within(v, eps)) return grid[i];
      }
      return kInf;
    };
    return gain_from_frontiers(frontier(agn), frontier(cond));
  };
}

DecisionReport signoff_decision(const IntervalEstimate& avg, const IntervalEstimate& fam,
                                double eps_avg, double eps_fam, double budget) {
  DecisionReport r;
  r.budget = budget;
  r.eps_avg = eps_avg;
  r.eps_fam = eps_fam;
  r.avg = avg;
  r.fam = fam;
  if (std::isnan(fam.point) || std::isnan(fam.hi)) {
    r.outcome = Outcome::inconclusive;
    r.notes.emplace_back("no conclusive family in the deployment partition");
    if (avg.lo > eps_avg) r.outcome = Outcome::reject;
    return r;
  }
  if (avg.hi <= eps_avg && fam.hi <= eps_fam) {
    r.outcome = Outcome::accept;
  } else if (avg.lo > eps_avg || fam.lo > eps_fam) {
    r.outcome = Outcome::reject;
  } else {
    r.outcome = Outcome::inconclusive;
  }
  if (avg.point_outside) r.notes.emplace_back("avg point estimate lies outside its interval");
  if (fam.point_outside) r.notes.emplace_back("fam point estimate lies outside its interval");
  return r;
}

std::vector<ChainStep> cumulative_chain(std::span<const PairedDataset> per_budget,
                                        const BudgetGrid& grid, std::string_view partition,
                                        std::span<const std::string> ordering, double eps) {
  if (per_budget.size() != grid.size()) fail(ErrorCode::GridMismatch, "need one dataset per budget");
  if (ordering.empty()) fail(ErrorCode::InvalidArgument, "chain ordering is empty");

  std::vector<FamilyTable> tables;
  std::set<std::string> known;
  for (const auto& ds : per_budget) {
    tables.emplace_back(ds, partition);
    for (const auto& f : tables.back().families()) known.insert(f);
  }
  std::set<std::string> seen;
  for (const auto& f : ordering) {
    if (!known.count(f)) {
      fail(ErrorCode::UnknownFamily, "family '" + f + "' not in partition '" + std::string(partition) + "'");
    }
    if (!seen.insert(f).second) fail(ErrorCode::InvalidArgument, "family '" + f + "' repeated in chain");
  }

  std::vector<std::vector<std::uint32_t>> identity(tables.size());
  for (std::size_t i = 0; i < tables.size(); ++i) {
    identity[i].resize(tables[i].size());
    std::iota(identity[i].begin(), identity[i].end(), 0U);
  }

  std::vector<ChainStep> out;
  std::set<std::string> prefix;
  for (const auto& fam : ordering) {
    prefix.insert(fam);
    std::vector<double> values;
    for (std::size_t i = 0; i < tables.size(); ++i) {
      const auto& names = tables[i].families();
      std::vector<char> mask(names.size());
      for (std::size_t f = 0; f < names.size(); ++f) mask[f] = prefix.count(names[f]) ? 1 : 0;
      values.push_back(tables[i].worst(identity[i], mask));
    }
    ChainStep step;
    step.families.assign(ordering.begin(), ordering.begin() + static_cast<std::ptrdiff_t>(out.size() + 1));
    step.frontier = {eps, grid_frontier(grid, values, eps), FrontierKind::point};
    if (!out.empty() && out.back().frontier.feasible() && step.frontier.feasible()) {
      step.increment = step.frontier.budget - out.back().frontier.budget;
    }
    out.push_back(std::move(step));
  }
  return out;
}

std::vector<std::string> order_by_count(const PairedDataset& ds, std::string_view partition) {
  auto summary = family_excess_table(ds, partition);
  std::vector<std::pair<std::size_t, std::string>> v;
  for (const auto& [name, st] : summary.per_family) v.emplace_back(st.count, name);
  std::sort(v.begin(), v.end());
  std::vector<std::string> out;
  for (auto& [n, name] : v) out.push_back(std::move(name));
  return out;
}

std::optional<double> additivity_ratio(double frontier_a, double frontier_b, double frontier_union) {
  if (!std::isfinite(frontier_a) || !std::isfinite(frontier_b) || !std::isfinite(frontier_union)) {
    return std::nullopt;
  }
  const double denom = frontier_a + frontier_b;
  if (!(denom > 0.0)) return std::nullopt;
  return frontier_union / denom;
}

Band audit_band(double delta, const AuditThresholds& t) {
  const double m = std::abs(delta);
  if (m <= t.phi1) return Band::PHI1;
  if (m < t.phi2) return Band::PHI2;
  return Band::PHI3;
}

AuditResult decoupled_audit(double anchor_gain, std::span<const double> permuted_gains,
                            const AuditThresholds& t) {
  if (permuted_gains.empty()) fail(ErrorCode::NoPermutations, "audit needs at least one permuted run");
  if (permuted_gains.size() > kMaxPermutations) {
    fail(ErrorCode::InvalidArgument, "at most " + std::to_string(kMaxPermutations) +
                                         " permutations per seed, got " +
                                         std::to_string(permuted_gains.size()));
  }
  AuditResult r;
  r.anchor = anchor_gain;
  r.n_permutations = permuted_gains.size();
  r.permuted_mean = std::accumulate(permuted_gains.begin(), permuted_gains.end(), 0.0) /
                    static_cast<double>(permuted_gains.size());
  r.delta = anchor_gain - r.permuted_mean;
  r.band = audit_band(r.delta, t);
  return r;
}

}  // namespace apsign
