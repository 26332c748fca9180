#pragma once

// Paired example bootstrap and across-seed Student-t intervals.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "apsign/records.hpp"

namespace apsign {

struct BootstrapConfig {
  std::size_t n_boot = 10000;
  double level = 0.95;
  std::uint64_t seed = 42;
  unsigned workers = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct IntervalEstimate {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t n_boot = 0;
  std::uint64_t seed = 0;
  double level = 0.95;
  // Percentile intervals can exclude the point estimate on skewed replicates.
  bool point_outside = false;
};

/// Statistic evaluated on a with-replacement draw of example indices.
using IndexStatistic = std::function<double(std::span<const std::uint32_t> draw)>;
using DatasetStatistic = std::function<double(const PairedDataset&)>;

/// Replicate values in replicate order. Replicate r draws its indices from
/// CounterRng(seed, r), so the result does not depend on the worker count.
std::vector<double> bootstrap_replicates(std::size_t n, const IndexStatistic& stat,
                                         const BootstrapConfig& cfg);

/// All n^n ordered draws (n <= 7), i.e. the exact bootstrap distribution.
std::vector<double> exhaustive_replicates(std::size_t n, const IndexStatistic& stat);

/// Type-7 quantile of an ascending sample.
double percentile(std::span<const double> sorted, double q);

IntervalEstimate percentile_interval(double point, std::vector<double> replicates,
                                     const BootstrapConfig& cfg);

IntervalEstimate bootstrap_ci(std::size_t n, const IndexStatistic& stat, const BootstrapConfig& cfg);

/// General form: the statistic sees a materialized resampled dataset.
IntervalEstimate bootstrap_ci(const PairedDataset& ds, const DatasetStatistic& stat,
                              const BootstrapConfig& cfg);

struct GainTest {
  IntervalEstimate interval;
  double p = 1.0;
  bool p_below_floor = false;  // raw p was 0; reported value is the 2/n_boot floor
};

/// Two-sided p = 2 min(Pr[G* <= 0], Pr[G* >= 0]); an atom at zero counts on both sides.
double two_sided_p(std::span<const double> replicates, bool* below_floor = nullptr);

/// Every dataset in `a` and `b` (one per budget) must share the example universe.
/// `gain` receives one index draw into that universe, applied to both methods.
GainTest paired_gain_bootstrap(std::span<const PairedDataset> a, std::span<const PairedDataset> b,
                               const IndexStatistic& gain, const BootstrapConfig& cfg);

/// mean +- t_{(1+level)/2, n-1} s / sqrt(n).
IntervalEstimate seed_t_interval(std::span<const double> values, double level = 0.95);

}  // namespace apsign
