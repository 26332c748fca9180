#pragma once

// Independent Gaussian factors under weighted quadratic answer losses.

#include <cstddef>
#include <span>
#include <vector>

#include "apsign/theory/information.hpp"

namespace apsign::theory {

struct FrontierSolution {
  double rate_nats = 0.0;
  double rate_bits = 0.0;
  std::vector<double> allocation;    // distortion d_j per factor
  std::vector<double> water_levels;  // nu_q (single query) or multipliers (joint)
  double lower_nats = 0.0;
  double upper_nats = 0.0;
  bool constraint_active = false;
  double residual = 0.0;  // max_q |sum_j alpha_qj d_j - eps| over active constraints
  int iterations = 0;
};

struct GaussianFamilySpec {
  std::vector<double> variances;           // sigma_j^2 > 0
  std::vector<std::vector<double>> queries;  // alpha_q, length m, non-negative
  std::vector<double> prior;               // optional weights over queries

  void validate() const;
  std::vector<double> normalized_prior() const;
};

/// Weighted reverse water-filling: d_j = sigma_j^2 where alpha_j = 0, else
/// min(sigma_j^2, nu / alpha_j) with sum_j alpha_j d_j = eps when active.
FrontierSolution waterfill_single_query(std::span<const double> variances,
                                        std::span<const double> alpha, double eps);

struct GaussianFrontier {
  FrontierSolution agnostic;               // all query constraints at once
  std::vector<FrontierSolution> per_query;  // conditioned, one per query
  double conditioned_rate_nats = 0.0;       // prior-weighted average of per_query
  double conditioned_rate_bits = 0.0;
};

/// Agnostic rate by a log-barrier Newton method in r_j = log(sigma_j^2 / d_j),
/// certified by the Lagrange dual bound; conditioned rate by per-query
/// water-filling.
GaussianFrontier gaussian_family_frontier(const GaussianFamilySpec& spec, double eps);

}  // namespace apsign::theory
