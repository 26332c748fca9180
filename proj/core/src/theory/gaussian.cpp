#include "apsign/theory/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double half_log_plus(double variance, double d) {
  if (d >= variance) return 0.0;
  return 0.5 * std::log(variance / d);
}

void check_factor_inputs(std::span<const double> variances, std::span<const double> alpha) {
  if (variances.empty()) fail(ErrorCode::InvalidArgument, "no Gaussian factors");
  if (alpha.size() != variances.size()) {
    fail(ErrorCode::InvalidArgument, "query weights and variances differ in length");
  }
  for (double v : variances) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidArgument, "variances must be positive");
  }
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) fail(ErrorCode::InvalidArgument, "query weights must be >= 0");
  }
}

void finish(FrontierSolution& s) {
  s.rate_bits = to_bits(s.rate_nats);
  if (s.lower_nats == 0.0 && s.upper_nats == 0.0) s.lower_nats = s.upper_nats = s.rate_nats;
}

}  // namespace

void GaussianFamilySpec::validate() const {
  if (variances.empty()) fail(ErrorCode::InvalidArgument, "no Gaussian factors");
  if (queries.empty()) fail(ErrorCode::InvalidArgument, "no queries");
  for (const auto& q : queries) check_factor_inputs(variances, q);
  if (!prior.empty()) {
    if (prior.size() != queries.size()) fail(ErrorCode::InvalidArgument, "prior length mismatch");
    double s = 0.0;
    for (double w : prior) {
      if (!(w >= 0.0)) fail(ErrorCode::InvalidArgument, "prior weights must be >= 0");
      s += w;
    }
    if (!(s > 0.0)) fail(ErrorCode::InvalidArgument, "prior weights sum to zero");
  }
}

std::vector<double> GaussianFamilySpec::normalized_prior() const {
  if (prior.empty()) return std::vector<double>(queries.size(), 1.0 / static_cast<double>(queries.size()));
  const double s = std::accumulate(prior.begin(), prior.end(), 0.0);
  std::vector<double> out;
  for (double w : prior) out.push_back(w / s);
  return out;
}

FrontierSolution waterfill_single_query(std::span<const double> variances,
                                        std::span<const double> alpha, double eps) {
  check_factor_inputs(variances, alpha);
  if (!(eps >= 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be >= 0");

  const std::size_t m = variances.size();
  FrontierSolution s;
  s.allocation.assign(variances.begin(), variances.end());

  double total = 0.0;
  double top = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    total += alpha[j] * variances[j];
    top = std::max(top, alpha[j] * variances[j]);
  }
  if (eps >= total) {
    s.water_levels = {top};
    finish(s);
    return s;
  }
  s.constraint_active = true;
  if (eps == 0.0) {
    for (std::size_t j = 0; j < m; ++j) {
      if (alpha[j] > 0.0) s.allocation[j] = 0.0;
    }
    s.water_levels = {0.0};
    s.rate_nats = s.lower_nats = s.upper_nats = kInf;
    s.rate_bits = kInf;
    return s;
  }

  // S(nu) = sum_j min(alpha_j sigma_j^2, nu) is continuous and increasing.
  auto spent = [&](double nu) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += std::min(alpha[j] * variances[j], nu);
    return acc;
  };
  double lo = 0.0;
  double hi = top;
  int it = 0;
  for (; it < 400 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (spent(mid) < eps ? lo : hi) = mid;
  }
  double nu = 0.5 * (lo + hi);

  // On the final linear segment nu has a closed form; use it when consistent.
  double saturated = 0.0;
  std::size_t free_count = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (alpha[j] == 0.0) continue;
    if (alpha[j] * variances[j] <= nu) saturated += alpha[j] * variances[j];
    else ++free_count;
  }
  if (free_count > 0) {
    const double exact = (eps - saturated) / static_cast<double>(free_count);
    if (std::abs(spent(exact) - eps) <= std::abs(spent(nu) - eps)) nu = exact;
  }

  double used = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (alpha[j] == 0.0) continue;
    s.allocation[j] = std::min(variances[j], nu / alpha[j]);
    used += alpha[j] * s.allocation[j];
    s.rate_nats += half_log_plus(variances[j], s.allocation[j]);
  }
  s.water_levels = {nu};
  s.residual = std::abs(used - eps);
  s.iterations = it;
  finish(s);
  return s;
}

namespace {

struct Barrier {
  Eigen::MatrixXd c;  // K x n, c_qj = alpha_qj sigma_j^2 over active rows/cols
  double eps = 0.0;

  // Returns false when r leaves the strict interior.
  bool slack(const Eigen::VectorXd& r, Eigen::VectorXd& h) const {
    if ((r.array() <= 0.0).any()) return false;
    h = eps - (c * (-r).array().exp().matrix()).array();
    return (h.array() > 0.0).all();
  }

  double value(const Eigen::VectorXd& r, double t) const {
    Eigen::VectorXd h;
    if (!slack(r, h)) return kInf;
    return t * 0.5 * r.sum() - h.array().log().sum() - r.array().log().sum();
  }

  // Lagrange dual bound for multipliers mu >= 0.
  double dual(const Eigen::VectorXd& mu) const {
    const Eigen::VectorXd w = c.transpose() * mu;
    double g = -eps * mu.sum();
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      g += 2.0 * w[j] > 1.0 ? 0.5 * std::log(2.0 * w[j]) + 0.5 : w[j];
    }
    return g;
  }
};

}  // namespace

GaussianFrontier gaussian_family_frontier(const GaussianFamilySpec& spec, double eps) {
  spec.validate();
  if (!(eps >= 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be >= 0");

  GaussianFrontier out;
  const auto prior = spec.normalized_prior();
  for (std::size_t q = 0; q < spec.queries.size(); ++q) {
    out.per_query.push_back(waterfill_single_query(spec.variances, spec.queries[q], eps));
    out.conditioned_rate_nats += prior[q] * out.per_query.back().rate_nats;
  }
  out.conditioned_rate_bits = to_bits(out.conditioned_rate_nats);

  const std::size_t m = spec.variances.size();
  std::vector<std::size_t> cols;
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < m; ++j) {
    for (const auto& q : spec.queries) {
      if (q[j] > 0.0) {
        cols.push_back(j);
        break;
      }
    }
  }
  double max_total = 0.0;
  for (std::size_t q = 0; q < spec.queries.size(); ++q) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) total += spec.queries[q][j] * spec.variances[j];
    if (total > 0.0) rows.push_back(q);
    max_total = std::max(max_total, total);
  }

  FrontierSolution& s = out.agnostic;
  s.allocation = spec.variances;
  s.water_levels.assign(spec.queries.size(), 0.0);
  if (eps >= max_total) {
    finish(s);
    return out;
  }
  s.constraint_active = true;
  if (eps == 0.0) {
    for (auto j : cols) s.allocation[j] = 0.0;
    s.rate_nats = s.rate_bits = s.lower_nats = s.upper_nats = kInf;
    return out;
  }

  Barrier b;
  b.eps = eps;
  b.c.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      b.c(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          spec.queries[rows[k]][cols[i]] * spec.variances[cols[i]];
    }
  }
  const auto n = static_cast<Eigen::Index>(cols.size());
  const auto nk = static_cast<Eigen::Index>(rows.size());

  // Strictly feasible start: uniform r with every constraint at half of eps.
  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, std::log(2.0 * max_total / eps));
  const double n_constraints = static_cast<double>(n + nk);
  double t = 1.0;
  double lower = -kInf;
  double upper = kInf;
  Eigen::VectorXd h;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(nk);
  int newton_steps = 0;

  for (int outer = 0; outer < 40; ++outer) {
    for (int inner = 0; inner < 200; ++inner) {
      b.slack(r, h);
      const Eigen::VectorXd e = (-r).array().exp();
      Eigen::MatrixXd a(nk, n);  // a_qj = c_qj e^{-r_j}
      for (Eigen::Index k = 0; k < nk; ++k) a.row(k) = b.c.row(k).cwiseProduct(e.transpose());
      const Eigen::VectorXd inv_h = h.cwiseInverse();
      Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, 0.5 * t) - a.transpose() * inv_h -
                             r.cwiseInverse();
      Eigen::MatrixXd hess = a.transpose() * inv_h.cwiseAbs2().asDiagonal() * a;
      hess.diagonal() += a.transpose() * inv_h + r.cwiseInverse().cwiseAbs2();
      const Eigen::VectorXd step = -hess.ldlt().solve(grad);
      const double decrement = -grad.dot(step);
      ++newton_steps;
      if (!(decrement > 1e-20)) break;

      const double f0 = b.value(r, t);
      double alpha = 1.0;
      Eigen::VectorXd next;
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        next = r + alpha * step;
        if (b.value(next, t) <= f0 - 0.25 * alpha * decrement) {
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
      r = next;
      if (decrement < 1e-16) break;
    }

    b.slack(r, h);
    mu = (t * h.array()).inverse();
    lower = std::max(lower, b.dual(mu));
    upper = std::min(upper, 0.5 * r.sum());
    if (upper - lower <= 1e-12 || n_constraints / t < 1e-14) break;
    t *= 10.0;
  }

  if (!(upper - lower <= 1e-9)) {
    fail(ErrorCode::SolverDiverged, "barrier stopped with duality gap " + format_double(upper - lower) +
                                        " nats (lower " + format_double(lower) + ", upper " +
                                        format_double(upper) + ")");
  }

  double residual = 0.0;
  for (Eigen::Index k = 0; k < nk; ++k) {
    s.water_levels[rows[static_cast<std::size_t>(k)]] = mu[k];
    if (h[k] < 1e-6 * eps) residual = std::max(residual, h[k]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t j = cols[static_cast<std::size_t>(i)];
    s.allocation[j] = spec.variances[j] * std::exp(-r[i]);
  }
  s.rate_nats = upper;
  s.lower_nats = std::max(0.0, lower);
  s.upper_nats = upper;
  s.residual = residual;
  s.iterations = newton_steps;
  s.rate_bits = to_bits(s.rate_nats);
  return out;
}

}  // namespace apsign::theory
