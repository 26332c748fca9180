#include "apsign/theory/separation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign::theory {

void FactorSpec::validate() const {
  if (v1.size() == 0 || v2.size() == 0) fail(ErrorCode::InvalidArgument, "factor laws are empty");
  if (!(lambda > 0.0 && lambda < 1.0)) {
    fail(ErrorCode::InvalidArgument, "lambda must lie in (0,1), got " + format_double(lambda));
  }
  if (side_info_cardinality == 0) fail(ErrorCode::InvalidArgument, "|W| must be at least 1");
  if (!(v1.entropy_nats() > 0.0) || !(v2.entropy_nats() > 0.0)) {
    fail(ErrorCode::DegenerateFactor, "both factors need positive entropy");
  }
}

SeparationRates strict_separation_frontiers(const FactorSpec& spec) {
  spec.validate();
  const double h1 = spec.v1.entropy_nats();
  const double h2 = spec.v2.entropy_nats();
  SeparationRates r;
  r.r_agn_nats = h1 + h2;  // independent factors
  r.r_cond_nats = spec.lambda * h1 + (1.0 - spec.lambda) * h2;
  r.gain_nats = (1.0 - spec.lambda) * h1 + spec.lambda * h2;
  return r;
}

namespace {

struct Point {
  double mass;
  std::size_t a1;  // answer to q1
  std::size_t a2;  // answer to q2
};

// Per-block mass on each answer of one query.
using AnswerMass = std::map<std::size_t, double>;

struct Block {
  double mass = 0.0;
  AnswerMass q1;
  AnswerMass q2;
};

double block_risk(double mass, const AnswerMass& by_answer) {
  double best = 0.0;
  for (const auto& [a, m] : by_answer) best = std::max(best, m);
  return mass - best;
}

double merged_risk(const Block& x, const Block& y, bool use_q1) {
  AnswerMass merged = use_q1 ? x.q1 : x.q2;
  for (const auto& [a, m] : use_q1 ? y.q1 : y.q2) merged[a] += m;
  return block_risk(x.mass + y.mass, merged);
}

template <typename Key>
std::vector<Block> group(const std::vector<Point>& pts, Key key) {
  std::map<decltype(key(pts.front())), Block> blocks;
  for (const auto& p : pts) {
    Block& b = blocks[key(p)];
    b.mass += p.mass;
    b.q1[p.a1] += p.mass;
    b.q2[p.a2] += p.mass;
  }
  std::vector<Block> out;
  for (auto& [k, b] : blocks) out.push_back(std::move(b));
  return out;
}

double block_entropy(const std::vector<Block>& blocks) {
  std::vector<double> m;
  for (const auto& b : blocks) m.push_back(b.mass);
  return entropy_nats(m);
}

constexpr double kRiskTolerance = 1e-15;

}  // namespace

SeparationEnumeration enumerate_separation(const FactorSpec& spec) {
  spec.validate();
  const std::size_t nw = spec.side_info_cardinality;
  std::vector<Point> pts;
  for (std::size_t i = 0; i < spec.v1.size(); ++i) {
    for (std::size_t j = 0; j < spec.v2.size(); ++j) {
      for (std::size_t w = 0; w < nw; ++w) {
        const double m = spec.v1[i] * spec.v2[j] / static_cast<double>(nw);
        if (m > 0.0) pts.push_back({m, i, j});
      }
    }
  }

  SeparationEnumeration out;
  out.points = spec.v1.size() * spec.v2.size() * nw;

  auto agn = group(pts, [](const Point& p) { return std::make_pair(p.a1, p.a2); });
  auto c1 = group(pts, [](const Point& p) { return p.a1; });
  auto c2 = group(pts, [](const Point& p) { return p.a2; });
  out.agnostic_blocks = agn.size();

  bool zero = true;
  for (const auto& b : agn) {
    zero = zero && block_risk(b.mass, b.q1) <= kRiskTolerance && block_risk(b.mass, b.q2) <= kRiskTolerance;
  }
  for (const auto& b : c1) zero = zero && block_risk(b.mass, b.q1) <= kRiskTolerance;
  for (const auto& b : c2) zero = zero && block_risk(b.mass, b.q2) <= kRiskTolerance;
  out.zero_risk = zero;

  // Both queries carry positive weight, so the agnostic encoder must keep every
  // pair of blocks apart for at least one of them.
  bool minimal = true;
  for (std::size_t i = 0; i < agn.size() && minimal; ++i) {
    for (std::size_t j = i + 1; j < agn.size() && minimal; ++j) {
      const double r = spec.lambda * merged_risk(agn[i], agn[j], true) +
                       (1.0 - spec.lambda) * merged_risk(agn[i], agn[j], false);
      minimal = r > kRiskTolerance;
    }
  }
  auto minimal_for = [&](const std::vector<Block>& blocks, bool q1) {
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      for (std::size_t j = i + 1; j < blocks.size(); ++j) {
        if (!(merged_risk(blocks[i], blocks[j], q1) > kRiskTolerance)) return false;
      }
    }
    return true;
  };
  out.minimal = minimal && minimal_for(c1, true) && minimal_for(c2, false);

  out.rates.r_agn_nats = block_entropy(agn);
  out.rates.r_cond_nats = spec.lambda * block_entropy(c1) + (1.0 - spec.lambda) * block_entropy(c2);
  out.rates.gain_nats = out.rates.r_agn_nats - out.rates.r_cond_nats;
  return out;
}

}  // namespace apsign::theory
