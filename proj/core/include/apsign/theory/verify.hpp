#pragma once

// Analytic fixtures for the theory solvers, a self-check suite over them, and
// JSON spec solving for the command line.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "apsign/theory/finite_alphabet.hpp"
#include "apsign/theory/gaussian.hpp"

namespace apsign::theory {

/// One query reading a uniform fair bit under 0-1 loss.
FiniteTaskSpec fair_bit_task(double eps);

/// X = (V1, V2, W) uniform on n1 x n2 x w; query 1 asks V1, query 2 asks V2,
/// both under 0-1 loss. Query weights are lambda and 1 - lambda.
FiniteTaskSpec two_factor_task(std::size_t n1, std::size_t n2, std::size_t w, double eps, double lambda = 0.5);

/// Unit variances with queries (1,0), (0,1) and, when `with_sum`, (1,1).
GaussianFamilySpec synergy_spec(bool with_sum);

struct FixtureCheck {
  std::string name;
  double expected = 0.0;
  double actual = 0.0;
  double tolerance = 0.0;
  std::string unit;  // "bits" or "nats"

  double deviation() const;
  bool pass() const { return deviation() <= tolerance; }
};

struct VerifyReport {
  std::vector<FixtureCheck> checks;

  double max_deviation() const;
  bool ok() const;
};

VerifyReport verify_theory_fixtures();

/// {"kind": "separation" | "gaussian" | "finite" | "rate_token", ...} -> JSON result.
std::string solve_theory_spec(std::string_view json_text);

}  // namespace apsign::theory
