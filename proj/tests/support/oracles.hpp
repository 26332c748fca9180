#pragma once

// Slow, obviously-correct reference computations the library is checked against.
// Nothing here calls into the code under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Row {
  std::string family;
  double raw = 0.0;
  double comp = 0.0;
};

inline double mean_excess(const std::vector<Row>& rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.comp - r.raw;
  return s / static_cast<double>(rows.size());
}

inline std::map<std::string, double> family_means(const std::vector<Row>& rows) {
  std::map<std::string, std::pair<double, double>> acc;
  for (const auto& r : rows) {
    acc[r.family].first += r.comp - r.raw;
    acc[r.family].second += 1.0;
  }
  std::map<std::string, double> out;
  for (const auto& [f, sc] : acc) out[f] = sc.first / sc.second;
  return out;
}

inline double worst_family(const std::vector<Row>& rows) {
  double w = -kInf;
  for (const auto& [f, m] : family_means(rows)) w = std::max(w, m);
  return w;
}

/// Smallest budget whose value is <= eps, scanning in grid order.
inline double scan_frontier(const std::vector<double>& budgets, const std::vector<double>& values, double eps) {
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (values[i] <= eps) return budgets[i];
  }
  return kInf;
}

/// Hyndman-Fan type 7 on an unsorted copy.
inline double quantile7(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Every ordered with-replacement draw of size n = 3, mapped through f.
inline std::vector<double> all_draws3(const std::function<double(std::size_t, std::size_t, std::size_t)>& f) {
  std::vector<double> out;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 3; ++k) out.push_back(f(i, j, k));
    }
  }
  return out;
}

/// Two-sided 0.975 Student-t quantiles for 1..10 degrees of freedom.
inline double t975(int df) {
  static const double table[] = {12.706204736, 4.302652730, 3.182446305, 2.776445105, 2.570581836,
                                 2.446911851, 2.364624252, 2.306004135, 2.262157163, 2.228138852};
  return table[df - 1];
}

inline double entropy_bits(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log2(x);
  }
  return h;
}

/// Calls `visit` with every set partition of {0..n-1} as a block label vector
/// in restricted-growth form.
inline void for_each_partition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> label(n, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t used) {
    if (i == n) {
      visit(label);
      return;
    }
    for (std::size_t b = 0; b <= used && b < n; ++b) {
      label[i] = b;
      rec(i + 1, b == used ? used + 1 : used);
    }
  };
  rec(0, 0);
}

/// Minimum entropy (bits) over partitions of X into blocks on which every
/// answer function is constant. masses[x], answers[q][x].
inline double min_zero_risk_rate(const std::vector<double>& masses,
                                 const std::vector<std::vector<std::size_t>>& answers) {
  double best = kInf;
  for_each_partition(masses.size(), [&](const std::vector<std::size_t>& label) {
    const std::size_t blocks = *std::max_element(label.begin(), label.end()) + 1;
    for (const auto& a : answers) {
      std::vector<long> seen(blocks, -1);
      for (std::size_t x = 0; x < masses.size(); ++x) {
        if (seen[label[x]] < 0) {
          seen[label[x]] = static_cast<long>(a[x]);
        } else if (seen[label[x]] != static_cast<long>(a[x])) {
          return;
        }
      }
    }
    std::vector<double> p(blocks, 0.0);
    for (std::size_t x = 0; x < masses.size(); ++x) p[label[x]] += masses[x];
    best = std::min(best, entropy_bits(p));
  });
  return best;
}

/// Reverse water-filling by scanning the water level on a relative grid of
/// step `rel_step`, then interpolating the piecewise-linear constraint inside
/// the bracketing cell. Returns the rate in nats.
inline double waterfill_grid(const std::vector<double>& var, const std::vector<double>& alpha, double eps,
                             double rel_step = 1e-4) {
  auto total = [&](double nu) {
    double s = 0.0;
    for (std::size_t j = 0; j < var.size(); ++j) s += std::min(alpha[j] * var[j], nu);
    return s;
  };
  auto rate = [&](double nu) {
    double r = 0.0;
    for (std::size_t j = 0; j < var.size(); ++j) {
      if (alpha[j] <= 0.0) continue;
      const double d = std::min(var[j], nu / alpha[j]);
      r += 0.5 * std::log(var[j] / d);
    }
    return r;
  };
  double top = 0.0;
  for (std::size_t j = 0; j < var.size(); ++j) top = std::max(top, alpha[j] * var[j]);
  if (total(top) <= eps) return 0.0;
  double hi = top;
  double lo = hi;
  while (total(lo) > eps) {
    hi = lo;
    lo = hi * (1.0 - rel_step);
  }
  const double t = (eps - total(lo)) / (total(hi) - total(lo));
  return rate(lo + t * (hi - lo));
}

}  // namespace oracle
