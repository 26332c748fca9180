#include "apsign/theory/information.hpp"

#include <cmath>
#include <numeric>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign::theory {

namespace {

constexpr double kNormTolerance = 1e-12;

void check_entries(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorCode::NotNormalized, "negative or non-finite probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    fail(ErrorCode::NotNormalized, "probabilities sum to " + format_double(sum));
  }
}

}  // namespace

DiscreteDistribution::DiscreteDistribution(std::vector<double> probabilities)
    : p_(std::move(probabilities)) {
  if (p_.empty()) fail(ErrorCode::NotNormalized, "empty distribution");
  check_entries(p_);
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "uniform distribution needs n >= 1");
  return DiscreteDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double DiscreteDistribution::entropy_nats() const { return theory::entropy_nats(p_); }

double entropy_nats(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

ShannonMeasures shannon_measures(const std::vector<std::vector<double>>& joint) {
  if (joint.empty() || joint.front().empty()) fail(ErrorCode::NotNormalized, "empty joint law");
  const std::size_t cols = joint.front().size();
  std::vector<double> flat;
  std::vector<double> row(joint.size(), 0.0);
  std::vector<double> col(cols, 0.0);
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (joint[i].size() != cols) fail(ErrorCode::InvalidArgument, "ragged joint matrix");
    for (std::size_t j = 0; j < cols; ++j) {
      flat.push_back(joint[i][j]);
      row[i] += joint[i][j];
      col[j] += joint[i][j];
    }
  }
  check_entries(flat);
  ShannonMeasures m;
  m.h_row_nats = entropy_nats(row);
  m.h_col_nats = entropy_nats(col);
  m.h_joint_nats = entropy_nats(flat);
  // Direct sum keeps MI exactly 0 for product laws instead of a cancellation residue.
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double p = joint[i][j];
      if (p > 0.0) mi += p * std::log(p / (row[i] * col[j]));
    }
  }
  m.mutual_information_nats = std::max(0.0, mi);
  return m;
}

std::vector<std::vector<double>> product_joint(const DiscreteDistribution& a,
                                               const DiscreteDistribution& b) {
  std::vector<std::vector<double>> j(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < b.size(); ++k) j[i][k] = a[i] * b[k];
  }
  return j;
}

}  // namespace apsign::theory
