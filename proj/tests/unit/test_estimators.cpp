#include <doctest.h>

#include <cmath>
#include <random>

#include "apsign/error.hpp"
#include "apsign/estimators.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace apsign;

TEST_CASE("avg_excess") {
  CHECK(avg_excess(fx::dataset({{"a", 1, 1}, {"a", 0, 0}, {"b", 0.5, 0.5}})) == 0.0);
  std::vector<oracle::Row> rows(5, {"a", 0.0, 1.0});
  CHECK(avg_excess(fx::dataset(rows)) == 1.0);
}

TEST_CASE("family_excess_table: two-family hand example") {
  const auto ds = fx::dataset({{"A", 0, 0.5}, {"A", 0, 0.5}, {"B", 0, 0}, {"B", 0, 0}});
  const auto s = family_excess_table(ds, "kw");
  CHECK(s.per_family.at("A").mean == 0.5);
  CHECK(s.per_family.at("B").mean == 0.0);
  REQUIRE(s.worst_family);
  CHECK(s.worst_family->family == "A");
  CHECK(s.worst_family->value == 0.5);
  CHECK(s.hidden_damage == 0.25);
  CHECK(hidden_damage(ds, "kw") == 0.25);
}

TEST_CASE("family_excess_table: single family equals the pooled mean") {
  const auto ds = fx::dataset({{"g", 0, 1}, {"g", 0, 0}, {"g", 1, 1}, {"g", 0, 1}});
  const auto s = family_excess_table(ds, "kw");
  CHECK(s.worst_family->value == s.avg_excess);
  CHECK(s.hidden_damage == 0.0);
}

TEST_CASE("worst family ties go to the smallest name") {
  const auto ds = fx::dataset({{"zeta", 0, 1}, {"alpha", 0, 1}, {"mid", 0, 0}});
  CHECK(family_excess_table(ds, "kw").worst_family->family == "alpha");
}

TEST_CASE("all-inconclusive partition reports NA") {
  const auto ds = fx::dataset({{"A", 0, 1}, {"B", 0, 0}}, 0.2, 5);
  const auto s = family_excess_table(ds, "kw");
  CHECK(s.all_inconclusive);
  CHECK_FALSE(s.worst_family);
  CHECK(std::isnan(s.hidden_damage));
}

TEST_CASE("worst2_concentration") {
  std::vector<oracle::Row> rows;
  // family means +0.3, +0.1, -0.2, +0.1
  for (int i = 0; i < 10; ++i) rows.push_back({"a", 0, i < 3 ? 1.0 : 0.0});
  for (int i = 0; i < 10; ++i) rows.push_back({"b", 0, i < 1 ? 1.0 : 0.0});
  for (int i = 0; i < 10; ++i) rows.push_back({"c", i < 2 ? 1.0 : 0.0, 0});
  for (int i = 0; i < 10; ++i) rows.push_back({"d", 0, i < 1 ? 1.0 : 0.0});
  const auto w2 = worst2_concentration(fx::dataset(rows), "kw");
  REQUIRE(w2);
  CHECK(*w2 == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_FALSE(worst2_concentration(fx::dataset({{"a", 1, 0}, {"b", 0, 0}}), "kw"));
  CHECK(*worst2_concentration(fx::dataset({{"a", 0, 1}, {"b", 0, 1}, {"c", 0, 0}}), "kw") == 1.0);
}

TEST_CASE("worst2_concentration: keyword-style fixture at 94%") {
  std::vector<oracle::Row> rows;
  fx::add_family(rows, "k1", 100, 47);
  fx::add_family(rows, "k2", 100, 47);
  fx::add_family(rows, "k3", 100, 6);
  fx::add_family(rows, "k4", 100, 0);
  CHECK(*worst2_concentration(fx::dataset(rows), "kw") == doctest::Approx(0.94).epsilon(1e-12));
}

TEST_CASE("architecture_gap") {
  CHECK(architecture_gap({{"F", 0.3}, {"G", 0.2}}, {{"F", 0.1}, {"G", 0.2}}).first == "F");
  CHECK(architecture_gap({{"F", 0.3}, {"G", 0.2}}, {{"F", 0.1}, {"G", 0.2}}).second == doctest::Approx(0.2));
  const auto same = architecture_gap({{"F", 0.3}, {"G", 0.2}}, {{"F", 0.3}, {"G", 0.2}});
  CHECK(same.first == "F");
  CHECK(same.second == 0.0);
  CHECK_THROWS_AS(architecture_gap({{"F", 0.3}}, {{"G", 0.3}}), Error);

  // 50 cells whose gaps average to +0.1052.
  double total = 0.0;
  for (int c = 0; c < 50; ++c) {
    const double gap = 0.1052 + 0.002 * (c % 2 == 0 ? 1 : -1);
    total += architecture_gap({{"F", 0.2 + gap}, {"G", 0.1}}, {{"F", 0.2}, {"G", 0.1}}).second;
  }
  CHECK(total / 50.0 == doctest::Approx(0.1052).epsilon(1e-12));
}

TEST_CASE("properties on random datasets match the direct oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<oracle::Row> rows;
    const int n = 5 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      rows.push_back({std::string(1, static_cast<char>('a' + rng() % 4)), static_cast<double>(rng() % 2),
                      static_cast<double>(rng() % 2)});
    }
    const auto ds = fx::dataset(rows);
    const auto s = family_excess_table(ds, "kw");
    CHECK(s.avg_excess == doctest::Approx(oracle::mean_excess(rows)).epsilon(1e-14));
    CHECK(s.worst_family->value == doctest::Approx(oracle::worst_family(rows)).epsilon(1e-14));
    CHECK(s.avg_excess <= s.worst_family->value + 1e-15);
    CHECK(s.hidden_damage >= -1e-15);
  }
}
