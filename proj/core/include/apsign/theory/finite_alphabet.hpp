#pragma once

// Bayes-risk frontier of a finite task: min I(X;U) subject to a per-query
// excess-risk tolerance, bracketed between a dual lower bound and achievable
// encoders.

#include <cstddef>
#include <span>
#include <vector>

#include "apsign/theory/gaussian.hpp"
#include "apsign/theory/information.hpp"

namespace apsign::theory {

struct FiniteQuery {
  std::vector<std::vector<double>> answer_law;  // |X| rows, each a law over Y_q
  std::vector<std::vector<double>> loss;        // |A_q| rows of l(a, y) >= 0
  double weight = 1.0;                          // query prior for the conditioned average
};

struct FiniteTaskSpec {
  DiscreteDistribution x_law;
  std::vector<FiniteQuery> queries;
  double epsilon = 0.0;

  void validate() const;
};

inline constexpr std::size_t kMaxFiniteInputs = 12;
inline constexpr std::size_t kMaxFiniteActions = 4096;

/// Reduced distortion rho_q(x, a) = E[l(a, Y_q) | X = x], indexed [x][a].
std::vector<std::vector<double>> reduced_distortion(const FiniteTaskSpec& spec, std::size_t q);

/// Raw Bayes risk sum_x p(x) min_a rho_q(x, a).
double raw_bayes_risk(const FiniteTaskSpec& spec, std::size_t q);

/// Excess risk of the deterministic encoder x -> block_of_x[x] with the best
/// decoder per block.
double encoder_excess(const FiniteTaskSpec& spec, std::size_t q, std::span<const std::size_t> block_of_x);

/// The same excess through posteriors: sum_B P(B) L(pi_B) - sum_x p(x) L(pi_x),
/// where L is the Bayes envelope of the query's loss.
double envelope_excess(const FiniteTaskSpec& spec, std::size_t q, std::span<const std::size_t> block_of_x);

struct FiniteFrontier {
  FrontierSolution agnostic;  // rate_nats = upper; allocation = best deterministic block labels
  double deterministic_upper_nats = 0.0;
  double randomized_upper_nats = 0.0;  // +inf when no feasible randomized point was found
  double single_query_lower_nats = 0.0;
  double joint_lower_nats = 0.0;
  std::vector<FrontierSolution> per_query;  // single-constraint brackets
  double conditioned_lower_nats = 0.0;      // weighted average of per-query brackets
  double conditioned_upper_nats = 0.0;
};

FiniteFrontier finite_alphabet_frontier(const FiniteTaskSpec& spec);

}  // namespace apsign::theory
