#include "apsign/theory/rate_token.hpp"

#include <algorithm>
#include <cmath>

#include "apsign/error.hpp"

namespace apsign::theory {

namespace {

void check(double entropy_nats, std::uint64_t vocab) {
  if (vocab < 2) fail(ErrorCode::InvalidArgument, "token vocabulary needs B >= 2");
  if (!(entropy_nats >= 0.0) || !std::isfinite(entropy_nats)) {
    fail(ErrorCode::InvalidArgument, "entropy must be finite and >= 0");
  }
}

}  // namespace

TokenBracket rate_token_bounds(double entropy_nats, std::uint64_t vocab) {
  check(entropy_nats, vocab);
  const double lo = entropy_nats / std::log(static_cast<double>(vocab));
  return {lo, lo + 1.0};
}

TokenCheck check_token_rate(double entropy_nats, std::uint64_t vocab, double mean_length,
                            double rel_tolerance) {
  check(entropy_nats, vocab);
  if (!(mean_length >= 0.0)) fail(ErrorCode::InvalidArgument, "mean token length must be >= 0");
  const double log_b = std::log(static_cast<double>(vocab));
  TokenCheck c;
  c.required_length = entropy_nats / log_b;
  c.slack = mean_length - c.required_length;
  c.violation = entropy_nats > log_b * mean_length + rel_tolerance * std::max(1.0, entropy_nats);
  return c;
}

}  // namespace apsign::theory
