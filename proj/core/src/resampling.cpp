#include "apsign/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "apsign/error.hpp"
#include "apsign/rng.hpp"
#include "apsign/util.hpp"

namespace apsign {

void BootstrapConfig::validate() const {
  if (n_boot == 0) fail(ErrorCode::InvalidArgument, "n_boot must be positive");
  if (!(level > 0.5 && level < 1.0)) {
    fail(ErrorCode::InvalidArgument, "confidence level must lie in (0.5, 1), got " + format_double(level));
  }
}

namespace {

unsigned resolve_workers(unsigned requested, std::size_t jobs) {
  unsigned w = requested ? requested : std::max(1U, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::min<std::size_t>(w, std::max<std::size_t>(jobs, 1)));
}

}  // namespace

std::vector<double> bootstrap_replicates(std::size_t n, const IndexStatistic& stat,
                                         const BootstrapConfig& cfg) {
  cfg.validate();
  if (n == 0) fail(ErrorCode::EmptyDataset, "cannot bootstrap an empty dataset");
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorCode::InvalidArgument, "dataset too large for 32-bit draw indices");
  }

  std::vector<double> out(cfg.n_boot);
  const unsigned workers = resolve_workers(cfg.workers, cfg.n_boot);
  std::vector<std::size_t> failed_at(workers, cfg.n_boot);
  std::vector<std::string> failure(workers);

  auto run = [&](unsigned w) {
    std::vector<std::uint32_t> draw(n);
    const std::size_t begin = cfg.n_boot * w / workers;
    const std::size_t end = cfg.n_boot * (w + 1) / workers;
    for (std::size_t r = begin; r < end; ++r) {
      CounterRng rng(cfg.seed, r);
      for (auto& i : draw) i = static_cast<std::uint32_t>(rng.bounded(n));
      try {
        out[r] = stat(draw);
      } catch (const std::exception& e) {
        failed_at[w] = r;
        failure[w] = e.what();
        return;
      }
    }
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  auto first = std::min_element(failed_at.begin(), failed_at.end());
  if (*first < cfg.n_boot) {
    auto w = static_cast<std::size_t>(first - failed_at.begin());
    fail(ErrorCode::StatisticFailure,
         "replicate " + std::to_string(*first) + ": " + failure[w]);
  }
  return out;
}

std::vector<double> exhaustive_replicates(std::size_t n, const IndexStatistic& stat) {
  if (n == 0) fail(ErrorCode::EmptyDataset, "cannot bootstrap an empty dataset");
  if (n > 7) fail(ErrorCode::InstanceTooLarge, "exhaustive bootstrap limited to n <= 7");
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= n;
  std::vector<double> out;
  out.reserve(total);
  std::vector<std::uint32_t> draw(n, 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t code = k;
    for (auto& d : draw) {
      d = static_cast<std::uint32_t>(code % n);
      code /= n;
    }
    out.push_back(stat(draw));
  }
  return out;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::EmptyDataset, "percentile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || lo + 1 >= sorted.size()) return sorted[lo];
  const double a = sorted[lo];
  const double b = sorted[lo + 1];
  if (a == b) return a;
  if (std::isfinite(a) && std::isfinite(b)) return a + frac * (b - a);
  double v = (1.0 - frac) * a + frac * b;
  if (std::isnan(v)) return frac < 0.5 ? a : b;
  return v;
}

IntervalEstimate percentile_interval(double point, std::vector<double> replicates,
                                     const BootstrapConfig& cfg) {
  for (double r : replicates) {
    if (std::isnan(r)) fail(ErrorCode::StatisticFailure, "statistic returned NaN on a replicate");
  }
  std::sort(replicates.begin(), replicates.end());
  IntervalEstimate est;
  est.point = point;
  est.lo = percentile(replicates, (1.0 - cfg.level) / 2.0);
  est.hi = percentile(replicates, (1.0 + cfg.level) / 2.0);
  est.n_boot = replicates.size();
  est.seed = cfg.seed;
  est.level = cfg.level;
  est.point_outside = point < est.lo || point > est.hi;
  return est;
}

IntervalEstimate bootstrap_ci(std::size_t n, const IndexStatistic& stat, const BootstrapConfig& cfg) {
  if (n == 0) fail(ErrorCode::EmptyDataset, "cannot bootstrap an empty dataset");
  std::vector<std::uint32_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0U);
  const double point = stat(identity);
  return percentile_interval(point, bootstrap_replicates(n, stat, cfg), cfg);
}

IntervalEstimate bootstrap_ci(const PairedDataset& ds, const DatasetStatistic& stat,
                              const BootstrapConfig& cfg) {
  if (ds.empty()) fail(ErrorCode::EmptyDataset, "cannot bootstrap an empty dataset");
  IndexStatistic by_index = [&](std::span<const std::uint32_t> draw) {
    PairedDataset rs;
    rs.budget = ds.budget;
    rs.provenance = ds.provenance;
    rs.loss_bound = ds.loss_bound;
    rs.partitions = ds.partitions;
    rs.pairs.reserve(draw.size());
    for (auto i : draw) rs.pairs.push_back(ds.pairs[i]);
    return stat(rs);
  };
  return percentile_interval(stat(ds), bootstrap_replicates(ds.size(), by_index, cfg), cfg);
}

double two_sided_p(std::span<const double> replicates, bool* below_floor) {
  if (replicates.empty()) fail(ErrorCode::EmptyDataset, "no replicates");
  std::size_t le = 0;
  std::size_t ge = 0;
  for (double g : replicates) {
    if (g <= 0.0) ++le;
    if (g >= 0.0) ++ge;
  }
  const double n = static_cast<double>(replicates.size());
  const double raw = 2.0 * static_cast<double>(std::min(le, ge)) / n;
  if (below_floor) *below_floor = raw == 0.0;
  return std::clamp(raw, 2.0 / n, 1.0);
}

GainTest paired_gain_bootstrap(std::span<const PairedDataset> a, std::span<const PairedDataset> b,
                               const IndexStatistic& gain, const BootstrapConfig& cfg) {
  if (a.empty() || b.empty()) fail(ErrorCode::EmptyDataset, "gain bootstrap needs datasets");
  const auto& ref = a.front();
  if (ref.empty()) fail(ErrorCode::EmptyDataset, "cannot bootstrap an empty dataset");
  auto same_universe = [&](const PairedDataset& d) {
    if (d.size() != ref.size()) return false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.pairs[i].example_id != ref.pairs[i].example_id) return false;
    }
    return true;
  };
  for (const auto& d : a) {
    if (!same_universe(d)) fail(ErrorCode::UniverseMismatch, "method A datasets differ in examples");
  }
  for (const auto& d : b) {
    if (!same_universe(d)) {
      fail(ErrorCode::UniverseMismatch, "method B datasets do not share method A's examples");
    }
  }

  auto replicates = bootstrap_replicates(ref.size(), gain, cfg);
  std::vector<std::uint32_t> identity(ref.size());
  std::iota(identity.begin(), identity.end(), 0U);
  GainTest out;
  out.p = two_sided_p(replicates, &out.p_below_floor);
  out.interval = percentile_interval(gain(identity), std::move(replicates), cfg);
  return out;
}

IntervalEstimate seed_t_interval(std::span<const double> values, double level) {
  if (values.size() < 2) {
    fail(ErrorCode::TooFewSeeds, "need at least 2 seeds, got " + std::to_string(values.size()));
  }
  if (!(level > 0.0 && level < 1.0)) fail(ErrorCode::InvalidArgument, "level must lie in (0,1)");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  const double t = boost::math::quantile(dist, (1.0 + level) / 2.0);
  IntervalEstimate est;
  est.point = mean;
  est.lo = mean - t * s / std::sqrt(n);
  est.hi = mean + t * s / std::sqrt(n);
  est.level = level;
  return est;
}

}  // namespace apsign
