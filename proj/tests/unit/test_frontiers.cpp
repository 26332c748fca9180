#include <doctest.h>

#include <cmath>
#include <random>

#include "apsign/error.hpp"
#include "apsign/frontiers.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace apsign;

namespace {

IntervalEstimate iv(double lo, double hi) {
  IntervalEstimate e;
  e.point = (lo + hi) / 2.0;
  e.lo = lo;
  e.hi = hi;
  return e;
}

ExcessCurve curve_with_hi(const BudgetGrid& grid, const std::vector<double>& point, const std::vector<double>& hi) {
  auto c = point_curve(grid, point, Variant::fam, "kw");
  for (std::size_t i = 0; i < hi.size(); ++i) c.values[i].hi = hi[i];
  return c;
}

}  // namespace

TEST_CASE("point frontier") {
  const BudgetGrid grid({0.2, 0.4, 1.0});
  const std::vector<double> v = {0.08, 0.04, 0.0};
  const auto c = point_curve(grid, v, Variant::avg);
  CHECK(point_frontier(c, 0.05).budget == 0.4);
  CHECK(point_frontier(c, 0.08).budget == 0.2);
  CHECK(point_frontier(c, 0.04).budget == 0.4);
  CHECK(point_frontier(c, 0.0).budget == 1.0);
  CHECK_FALSE(point_frontier(point_curve(grid, std::vector<double>{0.5, 0.5, 0.5}, Variant::avg), 0.1).feasible());
  CHECK(point_frontier(point_curve(grid, std::vector<double>{0.5, 0.5, 0.5}, Variant::avg), 0.1).budget_text() ==
        "INFEASIBLE");
  // A non-monotone curve still yields the first satisfying budget.
  CHECK(point_frontier(point_curve(grid, std::vector<double>{0.1, 0.0, 0.2}, Variant::avg), 0.05).budget == 0.4);
}

TEST_CASE("certified frontier uses the upper endpoint") {
  const BudgetGrid grid({0.4, 0.8, 1.0});
  const auto c = curve_with_hi(grid, {0.03, 0.02, 0.0}, {0.06, 0.04, 0.0});
  CHECK(certified_frontier(c, 0.05).budget == 0.8);
  CHECK(point_frontier(c, 0.05).budget == 0.4);
  CHECK(certified_frontier(c, 0.05).kind == FrontierKind::certified);
}

TEST_CASE("interpolated frontier is a linear crossing") {
  const BudgetGrid grid({0.2, 0.4, 1.0});
  const auto c = point_curve(grid, std::vector<double>{0.08, 0.04, 0.0}, Variant::avg);
  CHECK(interpolated_frontier(c, 0.06).budget == doctest::Approx(0.3));
}

TEST_CASE("conditioned gain on a fixed two-curve fixture") {
  const BudgetGrid grid({0.05, 0.4459, 0.5452, 0.7783, 0.8181, 0.8892, 0.9090, 1.0});
  // agnostic crosses 0.05 at 0.5452, 0.02 at 0.8181, 0.01 at 0.9090
  const std::vector<double> agn = {0.3, 0.2, 0.05, 0.03, 0.02, 0.015, 0.01, 0.0};
  // conditioned crosses 0.05 at 0.4459, 0.02 at 0.7783, 0.01 at 0.8892
  const std::vector<double> cond = {0.3, 0.05, 0.04, 0.02, 0.015, 0.01, 0.005, 0.0};
  const auto a = point_curve(grid, agn, Variant::fam, "kw");
  const auto c = point_curve(grid, cond, Variant::fam, "kw");
  const auto g05 = conditioned_gain(a, c, 0.05);
  CHECK(g05.agnostic.budget == 0.5452);
  CHECK(g05.conditioned.budget == 0.4459);
  CHECK(g05.gain == doctest::Approx(0.0993).epsilon(1e-12));
  CHECK(conditioned_gain(a, c, 0.02).gain == doctest::Approx(0.0398).epsilon(1e-3));
  CHECK(conditioned_gain(a, c, 0.01).gain == doctest::Approx(0.0198).epsilon(1e-2));

  CHECK(gain_from_frontiers(oracle::kInf, oracle::kInf) == 0.0);
  CHECK(gain_from_frontiers(oracle::kInf, 0.4) == oracle::kInf);
  CHECK(gain_from_frontiers(0.4, oracle::kInf) == -oracle::kInf);

  const auto other = point_curve(BudgetGrid({0.5, 1.0}), std::vector<double>{0.0, 0.0}, Variant::fam, "kw");
  CHECK_THROWS_AS(conditioned_gain(a, other, 0.05), Error);
}

TEST_CASE("signoff decision rule") {
  CHECK(signoff_decision(iv(0.01, 0.03), iv(0.02, 0.04), 0.05, 0.05).outcome == Outcome::accept);
  CHECK(signoff_decision(iv(0.01, 0.03), iv(0.07, 0.09), 0.05, 0.05).outcome == Outcome::reject);
  CHECK(signoff_decision(iv(0.01, 0.03), iv(0.02, 0.08), 0.05, 0.05).outcome == Outcome::inconclusive);
  CHECK(signoff_decision(iv(0.06, 0.07), iv(0.0, 0.01), 0.05, 0.05).outcome == Outcome::reject);
  auto nan = iv(0.0, 0.0);
  nan.point = nan.hi = std::nan("");
  CHECK(signoff_decision(iv(0.0, 0.01), nan, 0.05, 0.05).outcome == Outcome::inconclusive);
}

TEST_CASE("cumulative chain steps through the family frontiers") {
  const BudgetGrid grid({0.2733, 0.4701, 0.6973, 0.8799, 1.0});
  // Family Fk is clean from grid index k-1 onward.
  std::vector<PairedDataset> per_budget;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<oracle::Row> rows;
    for (std::size_t k = 0; k < 4; ++k) {
      const double comp = i >= k ? 0.0 : 1.0;
      for (int j = 0; j < 5; ++j) rows.push_back({"F" + std::to_string(k + 1), 0.0, comp});
    }
    per_budget.push_back(fx::dataset(rows, grid[i]));
  }
  const std::vector<std::string> order = {"F1", "F2", "F3", "F4"};
  const auto chain = cumulative_chain(per_budget, grid, "kw", order, 0.05);
  REQUIRE(chain.size() == 4);
  const double want[] = {0.2733, 0.4701, 0.6973, 0.8799};
  for (std::size_t i = 0; i < 4; ++i) CHECK(chain[i].frontier.budget == want[i]);
  CHECK_FALSE(chain[0].increment);
  CHECK(*chain[1].increment == doctest::Approx(0.4701 - 0.2733));

  const std::vector<std::string> bad = {"F1", "nope"};
  CHECK_THROWS_AS(cumulative_chain(per_budget, grid, "kw", bad, 0.05), Error);
  CHECK(order_by_count(per_budget[0], "kw") == order);
}

TEST_CASE("additivity ratio") {
  CHECK(*additivity_ratio(0.2, 0.2, 0.2) == 0.5);
  CHECK(*additivity_ratio(0.2, 0.3, 0.5) == doctest::Approx(1.0));
  const double r = *additivity_ratio(0.4, 0.4, 0.4 * 0.3271 * 2);
  CHECK(r == doctest::Approx(0.3271));
  CHECK_FALSE(additivity_ratio(oracle::kInf, 0.2, 0.4));
}

TEST_CASE("decoupled audit and bands") {
  CHECK(audit_band(0.0) == Band::PHI1);
  CHECK(audit_band(0.01) == Band::PHI1);
  CHECK(audit_band(-0.03) == Band::PHI2);
  CHECK(audit_band(0.05) == Band::PHI3);

  const std::vector<double> perm = {-0.0300, -0.0308};
  const auto a = decoupled_audit(0.0383, perm);
  CHECK(a.permuted_mean == doctest::Approx(-0.0304));
  CHECK(a.delta == doctest::Approx(0.0687));
  CHECK(a.band == Band::PHI3);
  CHECK(a.n_permutations == 2);

  const auto ident = decoupled_audit(0.1, std::vector<double>{0.1, 0.1});
  CHECK(ident.delta == 0.0);
  CHECK(ident.band == Band::PHI1);

  CHECK_THROWS_AS(decoupled_audit(0.0, std::vector<double>{}), Error);
  CHECK_THROWS_AS(decoupled_audit(0.0, std::vector<double>(11, 0.0)), Error);
}

TEST_CASE("frontier properties on random curves") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 0.2);
  const BudgetGrid grid = BudgetGrid::main_grid();
  for (int t = 0; t < 300; ++t) {
    std::vector<double> point(grid.size()), hi(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      point[i] = u(rng);
      hi[i] = point[i] + u(rng) / 4.0;
    }
    const auto c = curve_with_hi(grid, point, hi);
    const double e1 = u(rng);
    const double e2 = e1 + u(rng);
    const double p1 = point_frontier(c, e1).budget;
    CHECK(p1 == oracle::scan_frontier(grid.budgets(), point, e1));
    CHECK(point_frontier(c, e2).budget <= p1);
    CHECK(certified_frontier(c, e1).budget >= p1);
  }
}
