#include "apsign/theory/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "apsign/error.hpp"
#include "apsign/theory/information.hpp"
#include "apsign/theory/rate_token.hpp"
#include "apsign/theory/separation.hpp"

namespace apsign::theory {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

FiniteQuery identity_query(std::size_t n, std::size_t ny, const std::vector<std::size_t>& answer) {
  FiniteQuery q;
  q.answer_law.assign(n, std::vector<double>(ny, 0.0));
  for (std::size_t x = 0; x < n; ++x) q.answer_law[x][answer[x]] = 1.0;
  q.loss.assign(ny, std::vector<double>(ny, 1.0));
  for (std::size_t a = 0; a < ny; ++a) q.loss[a][a] = 0.0;
  return q;
}

ojson num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ojson solution_json(const FrontierSolution& s) {
  ojson j;
  j["rate_nats"] = num(s.rate_nats);
  j["rate_bits"] = num(s.rate_bits);
  j["lower_nats"] = num(s.lower_nats);
  j["upper_nats"] = num(s.upper_nats);
  j["allocation"] = s.allocation;
  j["water_levels"] = s.water_levels;
  j["constraint_active"] = s.constraint_active;
  j["residual"] = s.residual;
  return j;
}

}  // namespace

FiniteTaskSpec fair_bit_task(double eps) {
  FiniteTaskSpec s;
  s.x_law = DiscreteDistribution::uniform(2);
  s.queries.push_back(identity_query(2, 2, {0, 1}));
  s.epsilon = eps;
  return s;
}

FiniteTaskSpec two_factor_task(std::size_t n1, std::size_t n2, std::size_t w, double eps, double lambda) {
  const std::size_t n = n1 * n2 * w;
  std::vector<std::size_t> a1(n);
  std::vector<std::size_t> a2(n);
  for (std::size_t x = 0; x < n; ++x) {
    a1[x] = x / (n2 * w);
    a2[x] = (x / w) % n2;
  }
  FiniteTaskSpec s;
  s.x_law = DiscreteDistribution::uniform(n);
  s.queries.push_back(identity_query(n, n1, a1));
  s.queries.push_back(identity_query(n, n2, a2));
  s.queries[0].weight = lambda;
  s.queries[1].weight = 1.0 - lambda;
  s.epsilon = eps;
  return s;
}

GaussianFamilySpec synergy_spec(bool with_sum) {
  GaussianFamilySpec s;
  s.variances = {1.0, 1.0};
  s.queries = {{1.0, 0.0}, {0.0, 1.0}};
  if (with_sum) s.queries.push_back({1.0, 1.0});
  return s;
}

double FixtureCheck::deviation() const {
  if (expected == actual) return 0.0;
  return std::abs(expected - actual);
}

double VerifyReport::max_deviation() const {
  double m = 0.0;
  for (const auto& c : checks) m = std::max(m, c.deviation());
  return m;
}

bool VerifyReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const FixtureCheck& c) { return c.pass(); });
}

VerifyReport verify_theory_fixtures() {
  VerifyReport rep;
  auto add = [&](std::string name, double expected, double actual, double tol, std::string unit) {
    rep.checks.push_back({std::move(name), expected, actual, tol, std::move(unit)});
  };

  double closed_dev = 0.0;
  double enum_dev = 0.0;
  for (int k1 = 1; k1 <= 4; ++k1) {
    for (int k2 = 1; k2 <= 4; ++k2) {
      for (int l = 1; l <= 9; ++l) {
        const double lambda = l / 10.0;
        FactorSpec spec{DiscreteDistribution::uniform(std::size_t{1} << k1),
                        DiscreteDistribution::uniform(std::size_t{1} << k2), lambda, 2};
        const double expected = (1.0 - lambda) * k1 + lambda * k2;
        closed_dev = std::max(closed_dev, std::abs(strict_separation_frontiers(spec).gain_bits() - expected));
        enum_dev = std::max(enum_dev, std::abs(enumerate_separation(spec).rates.gain_bits() - expected));
      }
    }
  }
  add("separation closed-form gain, 144 cells (max deviation)", 0.0, closed_dev, 1e-9, "bits");
  add("separation enumeration gain, 144 cells (max deviation)", 0.0, enum_dev, 1e-9, "bits");

  for (double eps : {0.1, 0.25, 0.5}) {
    const auto base = gaussian_family_frontier(synergy_spec(false), eps);
    const auto with = gaussian_family_frontier(synergy_spec(true), eps);
    const std::string tag = "eps=" + std::to_string(eps).substr(0, 4);
    add("gaussian two-query rate " + tag, std::log(1.0 / eps), base.agnostic.rate_nats, 1e-8, "nats");
    add("gaussian three-query rate " + tag, std::log(2.0 / eps), with.agnostic.rate_nats, 1e-8, "nats");
    add("gaussian synergy penalty " + tag, std::log(2.0), with.agnostic.rate_nats - base.agnostic.rate_nats,
        1e-8, "nats");
  }

  {
    const std::vector<double> v = {1.0, 1.0};
    const std::vector<double> a = {1.0, 1.0};
    add("waterfill equal variances", std::log(4.0), waterfill_single_query(v, a, 0.5).rate_nats, 1e-10, "nats");
    const std::vector<double> v2 = {4.0, 1.0};
    add("waterfill one active factor", 0.5 * std::log(2.0), waterfill_single_query(v2, a, 3.0).rate_nats, 1e-10,
        "nats");
    add("waterfill two active factors", 0.5 * std::log(4.0 / 0.75) + 0.5 * std::log(1.0 / 0.75),
        waterfill_single_query(v2, a, 1.5).rate_nats, 1e-10, "nats");
  }

  for (double eps : {0.0, 0.5}) {
    const auto r = finite_alphabet_frontier(fair_bit_task(eps));
    const double expected = eps == 0.0 ? 1.0 : 0.0;
    const std::string tag = eps == 0.0 ? "eps=0" : "eps=0.5";
    add("fair bit lower " + tag, expected, to_bits(r.agnostic.lower_nats), 1e-6, "bits");
    add("fair bit upper " + tag, expected, to_bits(r.agnostic.upper_nats), 1e-6, "bits");
  }
  for (auto [n1, n2, w] : {std::array<std::size_t, 3>{2, 2, 2}, {2, 3, 2}, {3, 4, 1}, {2, 2, 3}}) {
    const auto r = finite_alphabet_frontier(two_factor_task(n1, n2, w, 0.0));
    const double expected = std::log2(static_cast<double>(n1 * n2));
    const std::string tag = std::to_string(n1) + "x" + std::to_string(n2) + "x" + std::to_string(w);
    add("two-factor lower " + tag, expected, to_bits(r.agnostic.lower_nats), 1e-6, "bits");
    add("two-factor upper " + tag, expected, to_bits(r.agnostic.upper_nats), 1e-6, "bits");
  }

  add("token bracket H=8 bits B=2", 8.0, rate_token_bounds(to_nats(8.0), 2).min_expected_length, 1e-12,
      "symbols");
  add("token bracket H=8 bits B=256", 1.0, rate_token_bounds(to_nats(8.0), 256).min_expected_length, 1e-12,
      "symbols");
  return rep;
}

std::string solve_theory_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigError, std::string("theory spec is not valid JSON: ") + e.what());
  }
  ojson out;
  try {
    const auto kind = j.at("kind").get<std::string>();
    out["kind"] = kind;
    if (kind == "separation") {
      FactorSpec spec{DiscreteDistribution(j.at("v1").get<std::vector<double>>()),
                      DiscreteDistribution(j.at("v2").get<std::vector<double>>()), j.at("lambda").get<double>(),
                      j.value("side_info", std::size_t{1})};
      const auto r = strict_separation_frontiers(spec);
      out["r_agn_bits"] = r.r_agn_bits();
      out["r_cond_bits"] = r.r_cond_bits();
      out["gain_bits"] = r.gain_bits();
      out["r_agn_nats"] = r.r_agn_nats;
      out["r_cond_nats"] = r.r_cond_nats;
      out["gain_nats"] = r.gain_nats;
      if (j.value("enumerate", false)) {
        const auto e = enumerate_separation(spec);
        out["enumeration"] = {{"gain_bits", e.rates.gain_bits()},
                              {"agnostic_blocks", e.agnostic_blocks},
                              {"zero_risk", e.zero_risk},
                              {"minimal", e.minimal}};
      }
    } else if (kind == "gaussian") {
      const double eps = j.at("epsilon").get<double>();
      const auto variances = j.at("variances").get<std::vector<double>>();
      if (j.contains("alpha")) {
        const auto alpha = j.at("alpha").get<std::vector<double>>();
        out["solution"] = solution_json(waterfill_single_query(variances, alpha, eps));
      } else {
        GaussianFamilySpec spec;
        spec.variances = variances;
        spec.queries = j.at("queries").get<std::vector<std::vector<double>>>();
        if (j.contains("prior")) spec.prior = j.at("prior").get<std::vector<double>>();
        const auto r = gaussian_family_frontier(spec, eps);
        out["agnostic"] = solution_json(r.agnostic);
        out["per_query"] = ojson::array();
        for (const auto& q : r.per_query) out["per_query"].push_back(solution_json(q));
        out["conditioned_rate_nats"] = r.conditioned_rate_nats;
        out["conditioned_rate_bits"] = r.conditioned_rate_bits;
      }
    } else if (kind == "finite") {
      FiniteTaskSpec spec;
      spec.x_law = DiscreteDistribution(j.at("x_law").get<std::vector<double>>());
      spec.epsilon = j.at("epsilon").get<double>();
      for (const auto& q : j.at("queries")) {
        FiniteQuery fq;
        fq.answer_law = q.at("answer_law").get<std::vector<std::vector<double>>>();
        fq.loss = q.at("loss").get<std::vector<std::vector<double>>>();
        fq.weight = q.value("weight", 1.0);
        spec.queries.push_back(std::move(fq));
      }
      const auto r = finite_alphabet_frontier(spec);
      out["agnostic_lower_bits"] = num(to_bits(r.agnostic.lower_nats));
      out["agnostic_upper_bits"] = num(to_bits(r.agnostic.upper_nats));
      out["agnostic_lower_nats"] = num(r.agnostic.lower_nats);
      out["agnostic_upper_nats"] = num(r.agnostic.upper_nats);
      out["conditioned_lower_bits"] = num(to_bits(r.conditioned_lower_nats));
      out["conditioned_upper_bits"] = num(to_bits(r.conditioned_upper_nats));
      out["note"] = "conditioned values are a per-query bracket average";
    } else if (kind == "rate_token") {
      const double h = j.contains("entropy_bits") ? to_nats(j.at("entropy_bits").get<double>())
                                                  : j.at("entropy_nats").get<double>();
      const auto vocab = j.at("vocab").get<std::uint64_t>();
      const auto b = rate_token_bounds(h, vocab);
      out["min_expected_length"] = b.min_expected_length;
      out["shannon_upper"] = b.shannon_upper;
      if (j.contains("mean_length")) {
        const auto c = check_token_rate(h, vocab, j.at("mean_length").get<double>());
        out["violation"] = c.violation;
        out["slack"] = c.slack;
      }
    } else {
      fail(ErrorCode::ConfigError, "unknown theory spec kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad theory spec: ") + e.what());
  }
  return out.dump(2) + "\n";
}

}  // namespace apsign::theory
