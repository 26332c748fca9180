#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "apsign/error.hpp"
#include "apsign/estimators.hpp"
#include "apsign/frontiers.hpp"
#include "apsign/resampling.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace apsign;

namespace {

IndexStatistic mean_of(std::vector<double> v) {
  return [v = std::move(v)](std::span<const std::uint32_t> draw) {
    double s = 0.0;
    for (auto i : draw) s += v[i];
    return s / static_cast<double>(draw.size());
  };
}

}  // namespace

TEST_CASE("replicates are identical for any worker count") {
  std::vector<double> x(200);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i));
  BootstrapConfig cfg;
  cfg.n_boot = 3000;
  cfg.seed = 42;
  cfg.workers = 1;
  const auto one = bootstrap_replicates(x.size(), mean_of(x), cfg);
  for (unsigned w : {2U, 3U, 8U}) {
    cfg.workers = w;
    CHECK(bootstrap_replicates(x.size(), mean_of(x), cfg) == one);
  }
  cfg.seed = 43;
  CHECK(bootstrap_replicates(x.size(), mean_of(x), cfg) != one);
}

TEST_CASE("constant statistic gives a zero-width interval") {
  BootstrapConfig cfg;
  cfg.n_boot = 500;
  const auto ci = bootstrap_ci(17, [](std::span<const std::uint32_t>) { return 0.25; }, cfg);
  CHECK(ci.point == 0.25);
  CHECK(ci.lo == 0.25);
  CHECK(ci.hi == 0.25);
}

TEST_CASE("single pair collapses to its value") {
  BootstrapConfig cfg;
  cfg.n_boot = 100;
  const auto ci = bootstrap_ci(1, mean_of({0.7}), cfg);
  CHECK(ci.lo == 0.7);
  CHECK(ci.hi == 0.7);
}

TEST_CASE("exhaustive enumeration for N = 3 matches the direct oracle") {
  const std::vector<double> x = {0.0, 1.0, 0.5};
  auto got = exhaustive_replicates(3, mean_of(x));
  auto want = oracle::all_draws3([&](std::size_t i, std::size_t j, std::size_t k) { return (x[i] + x[j] + x[k]) / 3.0; });
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  REQUIRE(got.size() == 27);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));

  // With many replicates the Monte Carlo quantiles approach the exact ones.
  BootstrapConfig cfg;
  cfg.n_boot = 20000;
  auto mc = bootstrap_replicates(3, mean_of(x), cfg);
  std::sort(mc.begin(), mc.end());
  CHECK(percentile(mc, 0.5) == doctest::Approx(oracle::quantile7(want, 0.5)).epsilon(1e-12));
  double mc_mean = std::accumulate(mc.begin(), mc.end(), 0.0) / static_cast<double>(mc.size());
  CHECK(mc_mean == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("percentile is type 7") {
  std::vector<double> v = {3.0, 1.0, 4.0, 1.5, 9.0, 2.6};
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (double q : {0.0, 0.025, 0.1, 0.5, 0.77, 0.975, 1.0}) {
    CHECK(percentile(sorted, q) == doctest::Approx(oracle::quantile7(v, q)).epsilon(1e-15));
  }
  const std::vector<double> inf = {0.1, 0.2, oracle::kInf, oracle::kInf};
  CHECK(percentile(inf, 1.0) == oracle::kInf);
  CHECK(std::isfinite(percentile(inf, 0.2)));
}

TEST_CASE("two_sided_p") {
  bool floor = false;
  CHECK(two_sided_p(std::vector<double>{0.1, 0.2, 0.3, 0.4}, &floor) == 0.5);
  CHECK(floor);
  CHECK(two_sided_p(std::vector<double>{0.0, 0.0, 0.0, 0.0}, &floor) == 1.0);
  CHECK_FALSE(floor);
  CHECK(two_sided_p(std::vector<double>{-1, 1, 1, 1, 1, 1, 1, 1, 1, 1}) == doctest::Approx(0.2));
}

TEST_CASE("paired gain bootstrap") {
  const BudgetGrid grid({0.2, 1.0});
  std::vector<oracle::Row> good, bad;
  for (int i = 0; i < 40; ++i) {
    const std::string f = i % 2 ? "A" : "B";
    good.push_back({f, 0.0, 0.0});
    bad.push_back({f, 0.0, 1.0});
  }
  std::vector<oracle::Row> clean(good);
  const std::vector<PairedDataset> agn = {fx::dataset(bad, 0.2), fx::dataset(clean, 1.0)};
  const std::vector<PairedDataset> cond = {fx::dataset(good, 0.2), fx::dataset(clean, 1.0)};
  auto tables = [](const std::vector<PairedDataset>& v) {
    std::vector<FamilyTable> t;
    for (const auto& d : v) t.emplace_back(d, "kw");
    return t;
  };
  BootstrapConfig cfg;
  cfg.n_boot = 1000;

  // Identical methods: every replicate gain is 0, p = 1.
  auto same = paired_gain_bootstrap(agn, agn, conditioned_gain_statistic(tables(agn), tables(agn), grid, Variant::fam, 0.05), cfg);
  CHECK(same.p == 1.0);
  CHECK(same.interval.point == 0.0);

  // Strictly better conditioned method: every replicate gain is +0.8, p at the floor.
  auto better = paired_gain_bootstrap(agn, cond, conditioned_gain_statistic(tables(agn), tables(cond), grid, Variant::fam, 0.05), cfg);
  CHECK(better.interval.point == doctest::Approx(0.8));
  CHECK(better.p == doctest::Approx(2.0 / 1000.0));
  CHECK(better.p_below_floor);

  std::vector<oracle::Row> shorter(good.begin(), good.end() - 1);
  const std::vector<PairedDataset> other = {fx::dataset(shorter, 0.2), fx::dataset(shorter, 1.0)};
  CHECK_THROWS_AS(paired_gain_bootstrap(agn, other, [](std::span<const std::uint32_t>) { return 0.0; }, cfg), Error);
}

TEST_CASE("seed_t_interval") {
  const std::vector<double> gains = {0.0153, 0.0304, 0.0189};
  const auto ci = seed_t_interval(gains);
  CHECK(ci.point == doctest::Approx(0.0215).epsilon(1e-3));
  CHECK(ci.lo == doctest::Approx(0.0019).epsilon(0.02));
  CHECK(ci.hi == doctest::Approx(0.0411).epsilon(0.01));

  const auto two = seed_t_interval(std::vector<double>{0.0, 1.0});
  CHECK(two.point == 0.5);
  CHECK(two.hi - two.point == doctest::Approx(oracle::t975(1) * 0.5).epsilon(1e-8));

  for (int n = 2; n <= 10; ++n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = std::cos(i * 1.3);
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double half = oracle::t975(n - 1) * std::sqrt(ss / (n - 1)) / std::sqrt(static_cast<double>(n));
    const auto est = seed_t_interval(v);
    CHECK(est.hi - est.point == doctest::Approx(half).epsilon(1e-8));
  }

  CHECK_THROWS_AS(seed_t_interval(std::vector<double>{1.0}), Error);
}

TEST_CASE("bootstrap config validation") {
  BootstrapConfig cfg;
  cfg.n_boot = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.n_boot = 10;
  cfg.level = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
