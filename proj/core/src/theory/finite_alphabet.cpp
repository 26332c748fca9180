#include "apsign/theory/finite_alphabet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-12;
constexpr double kMaxSlope = 200.0;
constexpr double kMinSlope = 1e-4;

using Matrix = std::vector<std::vector<double>>;

double envelope(std::span<const double> law, const Matrix& loss) {
  double best = kInf;
  for (const auto& row : loss) {
    double v = 0.0;
    for (std::size_t y = 0; y < law.size(); ++y) v += law[y] * row[y];
    best = std::min(best, v);
  }
  return best;
}

// Excess distortion rho_q(x, a) - min_a' rho_q(x, a'), indexed [x][a].
Matrix excess_distortion(const FiniteTaskSpec& spec, std::size_t q) {
  Matrix rho = reduced_distortion(spec, q);
  for (auto& row : rho) {
    const double m = *std::min_element(row.begin(), row.end());
    for (double& v : row) v = std::max(0.0, v - m);
  }
  return rho;
}

double logsumexp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Deterministic encoders: every set partition of X with the best action per
// block and query.

struct Enumerator {
  const std::vector<double>& p;
  const std::vector<Matrix>& rho;  // per query in scope, [x][a]
  double eps;

  std::size_t n = 0;
  std::size_t nq = 0;
  std::vector<std::size_t> label;
  std::vector<double> mass;
  // cost[(b * nq + q)] is a vector over actions.
  std::vector<std::vector<double>> cost;
  std::vector<double> block_min;  // b * nq + q
  std::vector<double> dist;       // per query
  std::size_t blocks = 0;

  double best_rate = kInf;
  std::vector<std::size_t> best_label;

  Enumerator(const std::vector<double>& p_, const std::vector<Matrix>& rho_, double eps_)
      : p(p_), rho(rho_), eps(eps_), n(p_.size()), nq(rho_.size()) {
    label.assign(n, 0);
    mass.assign(n, 0.0);
    cost.resize(n * nq);
    block_min.assign(n * nq, 0.0);
    dist.assign(nq, 0.0);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t q = 0; q < nq; ++q) cost[b * nq + q].assign(rho[q].front().size(), 0.0);
    }
  }

  void run() { visit(0); }

  void visit(std::size_t x) {
    for (std::size_t q = 0; q < nq; ++q) {
      if (dist[q] > eps + kFeasTol) return;
    }
    if (x == n) {
      double h = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) {
        if (mass[b] > 0.0) h -= mass[b] * std::log(mass[b]);
      }
      if (h < best_rate - 1e-15) {
        best_rate = h;
        best_label = label;
      }
      return;
    }
    const std::size_t limit = blocks + 1;
    for (std::size_t b = 0; b < limit && b < n; ++b) {
      const bool fresh = b == blocks;
      if (fresh) ++blocks;
      std::vector<std::vector<double>> saved_cost(nq);
      std::vector<double> saved_min(nq);
      const std::vector<double> saved_dist = dist;
      const double saved_mass = mass[b];
      for (std::size_t q = 0; q < nq; ++q) {
        auto& c = cost[b * nq + q];
        saved_cost[q] = c;
        saved_min[q] = block_min[b * nq + q];
        for (std::size_t a = 0; a < c.size(); ++a) c[a] += p[x] * rho[q][x][a];
        const double mn = *std::min_element(c.begin(), c.end());
        dist[q] += mn - block_min[b * nq + q];
        block_min[b * nq + q] = mn;
      }
      mass[b] += p[x];
      label[x] = b;

      visit(x + 1);

      mass[b] = saved_mass;
      dist = saved_dist;
      for (std::size_t q = 0; q < nq; ++q) {
        cost[b * nq + q] = std::move(saved_cost[q]);
        block_min[b * nq + q] = saved_min[q];
      }
      if (fresh) --blocks;
    }
  }
};

// ---------------------------------------------------------------------------
// Blahut-Arimoto with the combined distortion d_s = sum_q s_q rho_q.

struct ProductSpace {
  std::vector<std::size_t> radix;  // |A_q| per query in scope
  std::size_t size = 1;

  explicit ProductSpace(const std::vector<Matrix>& rho) {
    for (const auto& r : rho) {
      radix.push_back(r.front().size());
      size *= radix.back();
    }
  }

  std::size_t digit(std::size_t u, std::size_t q) const {
    for (std::size_t i = 0; i < q; ++i) u /= radix[i];
    return u % radix[q];
  }
};

struct BaOutcome {
  double lower = 0.0;               // Csiszar dual bound
  double rate = kInf;               // I(X;U) of the BA encoder
  std::vector<double> distortion;   // per query
};

BaOutcome blahut_arimoto(const std::vector<double>& p, const std::vector<Matrix>& rho,
                         const ProductSpace& space, std::span<const double> slopes, double eps) {
  const std::size_t n = p.size();
  const std::size_t nu = space.size;
  const std::size_t nq = rho.size();

  std::vector<std::vector<double>> d(n, std::vector<double>(nu, 0.0));
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t u = 0; u < nu; ++u) {
      double acc = 0.0;
      for (std::size_t q = 0; q < nq; ++q) acc += slopes[q] * rho[q][x][space.digit(u, q)];
      d[x][u] = acc;
    }
  }

  std::vector<double> log_q(nu, -std::log(static_cast<double>(nu)));
  std::vector<double> log_z(n);
  std::vector<double> log_c(nu);
  std::vector<double> buf(std::max(n, nu));

  auto update = [&] {
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t u = 0; u < nu; ++u) buf[u] = log_q[u] - d[x][u];
      log_z[x] = logsumexp(std::span<const double>(buf.data(), nu));
    }
    for (std::size_t u = 0; u < nu; ++u) {
      std::size_t k = 0;
      for (std::size_t x = 0; x < n; ++x) {
        if (p[x] > 0.0) buf[k++] = std::log(p[x]) - d[x][u] - log_z[x];
      }
      log_c[u] = logsumexp(std::span<const double>(buf.data(), k));
    }
  };

  double slope_eps = 0.0;
  for (std::size_t q = 0; q < nq; ++q) slope_eps += slopes[q] * eps;

  auto bound = [&] {
    double s = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      if (p[x] > 0.0) s -= p[x] * log_z[x];
    }
    double max_c = -kInf;
    for (std::size_t u = 0; u < nu; ++u) max_c = std::max(max_c, log_c[u]);
    return s - max_c - slope_eps;
  };

  BaOutcome out;
  out.lower = -kInf;
  for (int it = 0; it < 1000; ++it) {
    update();
    const double b = bound();
    const double prev = out.lower;
    out.lower = std::max(out.lower, b);
    double change = 0.0;
    for (std::size_t u = 0; u < nu; ++u) {
      if (log_q[u] == -kInf) continue;
      log_q[u] += log_c[u];
      change = std::max(change, std::abs(log_c[u]));
    }
    if (change < 1e-13 || (it > 20 && std::abs(out.lower - prev) < 1e-15)) break;
  }
  update();
  out.lower = std::max(out.lower, bound());

  // Encoder p(u|x) = q(u) e^{-d} / Z(x) against the updated output law.
  std::vector<double> log_marg(nu, -kInf);
  for (std::size_t u = 0; u < nu; ++u) log_marg[u] = log_q[u] + log_c[u];
  out.distortion.assign(nq, 0.0);
  double info = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    if (p[x] == 0.0) continue;
    for (std::size_t u = 0; u < nu; ++u) {
      const double lp = log_q[u] - d[x][u] - log_z[x];
      if (lp == -kInf) continue;
      const double w = std::exp(lp);
      if (w == 0.0) continue;
      info += p[x] * w * (lp - log_marg[u]);
      for (std::size_t q = 0; q < nq; ++q) out.distortion[q] += p[x] * w * rho[q][x][space.digit(u, q)];
    }
  }
  out.rate = std::max(0.0, info);
  return out;
}

struct BaSearch {
  double lower = 0.0;
  double feasible_rate = kInf;
};

// Maximizes the dual bound over slopes; records the best feasible BA encoder.
BaSearch search_slopes(const std::vector<double>& p, const std::vector<Matrix>& rho, double eps) {
  const ProductSpace space(rho);
  const std::size_t nq = rho.size();
  BaSearch out;

  auto eval = [&](const std::vector<double>& s) {
    BaOutcome r = blahut_arimoto(p, rho, space, s, eps);
    out.lower = std::max(out.lower, r.lower);
    bool ok = true;
    for (double dq : r.distortion) ok = ok && dq <= eps + kFeasTol;
    if (ok) out.feasible_rate = std::min(out.feasible_rate, r.rate);
    return r.lower;
  };

  // Log-spaced scan then golden refinement along one coordinate.
  auto line_search = [&](std::vector<double>& s, std::size_t q) {
    const double a0 = std::log(kMinSlope);
    const double a1 = std::log(kMaxSlope);
    constexpr int kScan = 24;
    double best_t = a1;
    double best_v = -kInf;
    for (int i = 0; i <= kScan; ++i) {
      const double t = a0 + (a1 - a0) * i / kScan;
      s[q] = std::exp(t);
      const double v = eval(s);
      if (v > best_v) {
        best_v = v;
        best_t = t;
      }
    }
    const double step = (a1 - a0) / kScan;
    double lo = std::max(a0, best_t - step);
    double hi = std::min(a1, best_t + step);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - g * (hi - lo);
    double d = lo + g * (hi - lo);
    s[q] = std::exp(c);
    double fc = eval(s);
    s[q] = std::exp(d);
    double fd = eval(s);
    for (int i = 0; i < 40; ++i) {
      if (fc >= fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - g * (hi - lo);
        s[q] = std::exp(c);
        fc = eval(s);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + g * (hi - lo);
        s[q] = std::exp(d);
        fd = eval(s);
      }
    }
    double t = fc >= fd ? c : d;
    if (best_v > std::max(fc, fd)) t = best_t;
    s[q] = std::exp(t);
  };

  std::vector<double> s(nq, 1.0);
  if (nq == 1) {
    line_search(s, 0);
    return out;
  }
  // Joint: common slope first, then coordinate sweeps.
  {
    const double a0 = std::log(kMinSlope);
    const double a1 = std::log(kMaxSlope);
    double best_t = a1;
    double best_v = -kInf;
    for (int i = 0; i <= 24; ++i) {
      const double t = a0 + (a1 - a0) * i / 24;
      std::vector<double> c(nq, std::exp(t));
      const double v = eval(c);
      if (v > best_v) {
        best_v = v;
        best_t = t;
      }
    }
    s.assign(nq, std::exp(best_t));
  }
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (std::size_t q = 0; q < nq; ++q) line_search(s, q);
  }
  return out;
}

struct Bracket {
  double lower = 0.0;
  double det_upper = kInf;
  double rand_upper = kInf;
  std::vector<std::size_t> labels;

  double upper() const { return std::min(det_upper, rand_upper); }
};

Bracket solve(const std::vector<double>& p, const std::vector<Matrix>& rho, double eps) {
  Bracket b;
  Enumerator en(p, rho, eps);
  en.run();
  b.det_upper = en.best_rate;
  b.labels = en.best_label;
  BaSearch ba = search_slopes(p, rho, eps);
  b.lower = std::max(0.0, ba.lower);
  b.rand_upper = ba.feasible_rate;
  return b;
}

FrontierSolution to_solution(const Bracket& b) {
  FrontierSolution s;
  s.upper_nats = b.upper();
  s.lower_nats = std::min(b.lower, s.upper_nats);
  s.rate_nats = s.upper_nats;
  s.rate_bits = to_bits(s.rate_nats);
  for (auto l : b.labels) s.allocation.push_back(static_cast<double>(l));
  s.constraint_active = s.upper_nats > 0.0;
  return s;
}

}  // namespace

void FiniteTaskSpec::validate() const {
  const std::size_t n = x_law.size();
  if (n == 0) fail(ErrorCode::InvalidArgument, "empty input alphabet");
  if (n > kMaxFiniteInputs) {
    fail(ErrorCode::InstanceTooLarge, "|X| = " + std::to_string(n) + " exceeds " +
                                          std::to_string(kMaxFiniteInputs));
  }
  if (queries.empty()) fail(ErrorCode::InvalidArgument, "finite task has no queries");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) fail(ErrorCode::InvalidArgument, "tolerance must be >= 0");
  std::size_t actions = 1;
  for (const auto& q : queries) {
    if (q.answer_law.size() != n) fail(ErrorCode::InvalidArgument, "answer law needs one row per input");
    if (q.loss.empty()) fail(ErrorCode::InvalidArgument, "query has no actions");
    const std::size_t ny = q.loss.front().size();
    if (ny == 0) fail(ErrorCode::InvalidArgument, "query has no answers");
    for (const auto& row : q.loss) {
      if (row.size() != ny) fail(ErrorCode::InvalidArgument, "ragged loss matrix");
      for (double v : row) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "losses must be finite and >= 0");
      }
    }
    for (const auto& row : q.answer_law) {
      if (row.size() != ny) fail(ErrorCode::InvalidArgument, "answer law width differs from loss width");
      double s = 0.0;
      for (double v : row) {
        if (!(v >= 0.0)) fail(ErrorCode::NotNormalized, "negative answer probability");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-9) fail(ErrorCode::NotNormalized, "answer law row sums to " + format_double(s));
    }
    if (!(q.weight >= 0.0)) fail(ErrorCode::InvalidArgument, "query weight must be >= 0");
    actions *= q.loss.size();
    if (actions > kMaxFiniteActions) {
      fail(ErrorCode::InstanceTooLarge, "action product exceeds " + std::to_string(kMaxFiniteActions));
    }
  }
}

Matrix reduced_distortion(const FiniteTaskSpec& spec, std::size_t q) {
  const auto& query = spec.queries.at(q);
  Matrix rho(spec.x_law.size(), std::vector<double>(query.loss.size(), 0.0));
  for (std::size_t x = 0; x < rho.size(); ++x) {
    for (std::size_t a = 0; a < query.loss.size(); ++a) {
      double v = 0.0;
      for (std::size_t y = 0; y < query.loss[a].size(); ++y) v += query.answer_law[x][y] * query.loss[a][y];
      rho[x][a] = v;
    }
  }
  return rho;
}

double raw_bayes_risk(const FiniteTaskSpec& spec, std::size_t q) {
  const Matrix rho = reduced_distortion(spec, q);
  double r = 0.0;
  for (std::size_t x = 0; x < rho.size(); ++x) {
    r += spec.x_law[x] * *std::min_element(rho[x].begin(), rho[x].end());
  }
  return r;
}

double encoder_excess(const FiniteTaskSpec& spec, std::size_t q, std::span<const std::size_t> block_of_x) {
  const Matrix rho = reduced_distortion(spec, q);
  if (block_of_x.size() != rho.size()) fail(ErrorCode::InvalidArgument, "encoder needs one label per input");
  const std::size_t nb = *std::max_element(block_of_x.begin(), block_of_x.end()) + 1;
  Matrix cost(nb, std::vector<double>(rho.front().size(), 0.0));
  for (std::size_t x = 0; x < rho.size(); ++x) {
    for (std::size_t a = 0; a < rho[x].size(); ++a) cost[block_of_x[x]][a] += spec.x_law[x] * rho[x][a];
  }
  double coded = 0.0;
  for (const auto& row : cost) coded += *std::min_element(row.begin(), row.end());
  return coded - raw_bayes_risk(spec, q);
}

double envelope_excess(const FiniteTaskSpec& spec, std::size_t q, std::span<const std::size_t> block_of_x) {
  const auto& query = spec.queries.at(q);
  const std::size_t n = spec.x_law.size();
  if (block_of_x.size() != n) fail(ErrorCode::InvalidArgument, "encoder needs one label per input");
  const std::size_t ny = query.loss.front().size();
  const std::size_t nb = *std::max_element(block_of_x.begin(), block_of_x.end()) + 1;

  Matrix joint(nb, std::vector<double>(ny, 0.0));
  std::vector<double> mass(nb, 0.0);
  double raw = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    raw += spec.x_law[x] * envelope(query.answer_law[x], query.loss);
    mass[block_of_x[x]] += spec.x_law[x];
    for (std::size_t y = 0; y < ny; ++y) joint[block_of_x[x]][y] += spec.x_law[x] * query.answer_law[x][y];
  }
  double coded = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    if (mass[b] <= 0.0) continue;
    std::vector<double> post(ny);
    for (std::size_t y = 0; y < ny; ++y) post[y] = joint[b][y] / mass[b];
    coded += mass[b] * envelope(post, query.loss);
  }
  return coded - raw;
}

FiniteFrontier finite_alphabet_frontier(const FiniteTaskSpec& spec) {
  spec.validate();
  const auto& p = spec.x_law.probabilities();
  const double eps = spec.epsilon;

  std::vector<Matrix> rho;
  for (std::size_t q = 0; q < spec.queries.size(); ++q) rho.push_back(excess_distortion(spec, q));

  FiniteFrontier out;
  double weight_sum = 0.0;
  for (const auto& q : spec.queries) weight_sum += q.weight;
  if (!(weight_sum > 0.0)) fail(ErrorCode::InvalidArgument, "query weights sum to zero");

  double single_lower = 0.0;
  std::vector<Bracket> brackets;
  for (std::size_t q = 0; q < rho.size(); ++q) {
    brackets.push_back(solve(p, {rho[q]}, eps));
    const Bracket& b = brackets.back();
    if (!std::isfinite(b.upper())) {
      fail(ErrorCode::InfeasibleTolerance, "no encoder meets the tolerance for query " + std::to_string(q));
    }
    out.per_query.push_back(to_solution(b));
    single_lower = std::max(single_lower, out.per_query.back().lower_nats);
    const double w = spec.queries[q].weight / weight_sum;
    out.conditioned_lower_nats += w * out.per_query.back().lower_nats;
    out.conditioned_upper_nats += w * out.per_query.back().upper_nats;
  }

  Bracket joint = rho.size() == 1 ? brackets.front() : solve(p, rho, eps);
  if (!std::isfinite(joint.upper())) fail(ErrorCode::InfeasibleTolerance, "no encoder meets all tolerances");

  out.single_query_lower_nats = single_lower;
  out.joint_lower_nats = joint.lower;
  out.deterministic_upper_nats = joint.det_upper;
  out.randomized_upper_nats = joint.rand_upper;
  joint.lower = std::max(joint.lower, single_lower);
  out.agnostic = to_solution(joint);
  return out;
}

}  // namespace apsign::theory
