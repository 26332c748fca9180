#pragma once

#include <cstdint>

namespace apsign::theory {

/// Expected code length bracket, in tokens, for a source of entropy H over a
/// B-symbol token vocabulary: [H / log B, H / log B + 1).
struct TokenBracket {
  double min_expected_length = 0.0;
  double shannon_upper = 1.0;  // exclusive
};

TokenBracket rate_token_bounds(double entropy_nats, std::uint64_t vocab);

struct TokenCheck {
  bool violation = false;       // H > log B * mean_length
  double required_length = 0.0;  // H / log B
  double slack = 0.0;            // mean_length - required_length
};

/// Flags an observed mean token count that undercuts the lossless converse.
TokenCheck check_token_rate(double entropy_nats, std::uint64_t vocab, double mean_length,
                            double rel_tolerance = 1e-12);

}  // namespace apsign::theory
