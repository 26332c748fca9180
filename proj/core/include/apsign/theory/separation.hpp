#pragma once

// Two independent answer factors plus irrelevant side information: the
// construction where query-conditioned compression is strictly cheaper.

#include <cstddef>

#include "apsign/theory/information.hpp"

namespace apsign::theory {

struct FactorSpec {
  DiscreteDistribution v1;
  DiscreteDistribution v2;
  double lambda = 0.5;                   // P(Q = q1); q1 asks for V1, q2 for V2
  std::size_t side_info_cardinality = 1;  // |W|, uniform and irrelevant to both queries

  void validate() const;
};

struct SeparationRates {
  double r_agn_nats = 0.0;
  double r_cond_nats = 0.0;
  double gain_nats = 0.0;

  double r_agn_bits() const { return to_bits(r_agn_nats); }
  double r_cond_bits() const { return to_bits(r_cond_nats); }
  double gain_bits() const { return to_bits(gain_nats); }
};

/// Closed form at zero tolerance: r_agn = H(V1,V2), r_cond = lambda H(V1) +
/// (1 - lambda) H(V2).
SeparationRates strict_separation_frontiers(const FactorSpec& spec);

struct SeparationEnumeration {
  SeparationRates rates;
  std::size_t points = 0;            // |V1| |V2| |W|
  std::size_t agnostic_blocks = 0;   // cells of the coarsest zero-risk encoder
  bool zero_risk = false;            // every block answers both queries exactly
  bool minimal = false;              // merging any two blocks creates risk
};

/// Enumerates the input space point by point, builds the coarsest deterministic
/// encoder with zero Bayes risk (agnostic: both queries; conditioned: the asked
/// query only), verifies zero risk and minimality numerically, and returns the
/// entropies of the resulting block laws.
SeparationEnumeration enumerate_separation(const FactorSpec& spec);

}  // namespace apsign::theory
