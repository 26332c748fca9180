#pragma once

// Discrete distributions and Shannon quantities. Internal unit is nats.

#include <cstddef>
#include <span>
#include <vector>

namespace apsign::theory {

inline constexpr double kLn2 = 0.69314718055994530942;

inline double to_bits(double nats) { return nats / kLn2; }
inline double to_nats(double bits) { return bits * kLn2; }

/// Entries are non-negative and sum to 1 within 1e-12.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;
  explicit DiscreteDistribution(std::vector<double> probabilities);

  static DiscreteDistribution uniform(std::size_t n);

  const std::vector<double>& probabilities() const noexcept { return p_; }
  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }

  double entropy_nats() const;
  double entropy_bits() const { return to_bits(entropy_nats()); }

 private:
  std::vector<double> p_;
};

/// -sum p log p with 0 log 0 = 0; no normalization check.
double entropy_nats(std::span<const double> p);

struct ShannonMeasures {
  double h_row_nats = 0.0;
  double h_col_nats = 0.0;
  double h_joint_nats = 0.0;
  double mutual_information_nats = 0.0;

  double h_row_bits() const { return to_bits(h_row_nats); }
  double h_col_bits() const { return to_bits(h_col_nats); }
  double h_joint_bits() const { return to_bits(h_joint_nats); }
  double mutual_information_bits() const { return to_bits(mutual_information_nats); }
};

/// Marginal, joint and mutual information of a two-dimensional joint law.
ShannonMeasures shannon_measures(const std::vector<std::vector<double>>& joint);

/// Joint law of independent components (outer product, row-major in `a`).
std::vector<std::vector<double>> product_joint(const DiscreteDistribution& a,
                                               const DiscreteDistribution& b);

}  // namespace apsign::theory
