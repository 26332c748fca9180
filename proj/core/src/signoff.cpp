#include "apsign/signoff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;


std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Re-raises `e` with a step prefix, keeping its code.
[[noreturn]] void rethrow_in(const std::string& step, const Error& e) {
  std::string msg = e.what();
  const auto colon = msg.find(": ");
  if (colon != std::string::npos) msg = msg.substr(colon + 2);
  throw Error(e.code(), step + ": " + msg);
}

std::string seed_text(const std::optional<std::int64_t>& seed) {
  return seed ? std::to_string(*seed) : std::string("-");
}

ojson num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

ojson frontier_json(double budget) {
  if (std::isinf(budget)) return "INFEASIBLE";
  return budget;
}

std::string csv_num(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

std::string csv_frontier(double b) { return std::isinf(b) ? "INFEASIBLE" : format_double(b); }

ojson interval_json(const IntervalEstimate& e) {
  ojson j;
  j["point"] = num(e.point);
  j["lo"] = num(e.lo);
  j["hi"] = num(e.hi);
  j["level"] = e.level;
  j["n_boot"] = e.n_boot;
  j["seed"] = e.seed;
  if (e.point_outside) j["point_outside"] = true;
  return j;
}

SparsePolicy policy_from(const std::string& text) {
  if (text == "merge_to_parent" || text == "merge") return SparsePolicy::merge_to_parent;
  if (text == "mark_inconclusive" || text == "inconclusive") return SparsePolicy::mark_inconclusive;
  fail(ErrorCode::ConfigError, "unknown sparse policy '" + text + "'");
}

std::string_view policy_text(SparsePolicy p) {
  return p == SparsePolicy::merge_to_parent ? "merge_to_parent" : "mark_inconclusive";
}

Variant variant_from(const std::string& text) {
  if (text == "avg") return Variant::avg;
  if (text == "fam") return Variant::fam;
  fail(ErrorCode::ConfigError, "unknown gain variant '" + text + "'");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      fail(ErrorCode::ConfigError, "unknown key '" + it.key() + "' in " + std::string(where));
    }
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() || base.empty() ? p : base / p;
}

PartitionEntry parse_partition_entry(const json& j, const fs::path& base) {
  PartitionEntry e;
  if (j.is_string()) {
    e.spec = load_partition(resolve(j.get<std::string>(), base));
    return e;
  }
  if (!j.is_object()) fail(ErrorCode::ConfigError, "partition entry must be an object or a path");
  if (j.contains("file")) {
    check_keys(j, {"file", "name", "n_min", "policy"}, "partition entry");
    e.spec = load_partition(resolve(j.at("file").get<std::string>(), base));
    if (j.contains("name")) e.spec.name = j.at("name").get<std::string>();
    if (j.contains("n_min")) e.spec.n_min = j.at("n_min").get<std::size_t>();
    if (j.contains("policy")) e.spec.sparse_policy = policy_from(j.at("policy").get<std::string>());
    return e;
  }
  if (j.value("from_labels", false)) {
    check_keys(j, {"name", "from_labels", "n_min", "policy", "parent"}, "partition entry");
    e.from_labels = true;
    e.spec.name = j.at("name").get<std::string>();
    e.spec.n_min = j.value("n_min", e.spec.n_min);
    if (j.contains("policy")) e.spec.sparse_policy = policy_from(j.at("policy").get<std::string>());
    if (j.contains("parent")) e.spec.parent = j.at("parent").get<std::map<std::string, std::string>>();
    return e;
  }
  e.spec = parse_partition(j.dump());
  return e;
}

}  // namespace

SignoffConfig SignoffConfig::from_json(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::ConfigError, "config must be a JSON object");
  check_keys(j,
             {"records", "reference_method", "methods", "dataset", "backbone", "reference_backbone",
              "partitions", "deployment_partition", "budgets", "epsilons", "eps_avg", "eps_fam",
              "bootstrap", "loss", "unpaired", "gains", "audit", "output"},
             "config");
  SignoffConfig c;
  try {
    if (j.contains("records")) {
      const auto& r = j.at("records");
      if (r.is_string()) {
        c.records.push_back(resolve(r.get<std::string>(), base_dir));
      } else {
        for (const auto& p : r) c.records.push_back(resolve(p.get<std::string>(), base_dir));
      }
    }
    c.reference_method = j.value("reference_method", c.reference_method);
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
    if (j.contains("backbone")) c.backbone = j.at("backbone").get<std::string>();
    if (j.contains("reference_backbone")) c.reference_backbone = j.at("reference_backbone").get<std::string>();
    if (j.contains("partitions")) {
      for (const auto& p : j.at("partitions")) c.partitions.push_back(parse_partition_entry(p, base_dir));
    }
    c.deployment_partition = j.value("deployment_partition", std::string{});
    if (j.contains("budgets")) c.grid = BudgetGrid(j.at("budgets").get<std::vector<double>>());
    if (j.contains("epsilons")) c.epsilons = j.at("epsilons").get<std::vector<double>>();
    c.eps_avg = j.value("eps_avg", c.eps_avg);
    c.eps_fam = j.value("eps_fam", c.eps_fam);
    if (j.contains("bootstrap")) {
      const auto& b = j.at("bootstrap");
      check_keys(b, {"n_boot", "level", "seed", "workers"}, "bootstrap");
      c.bootstrap.n_boot = b.value("n_boot", c.bootstrap.n_boot);
      c.bootstrap.level = b.value("level", c.bootstrap.level);
      c.bootstrap.seed = b.value("seed", c.bootstrap.seed);
      c.bootstrap.workers = b.value("workers", c.bootstrap.workers);
    }
    if (j.contains("loss")) {
      const auto& l = j.at("loss");
      check_keys(l, {"kind", "bound"}, "loss");
      const auto kind = l.value("kind", std::string("bounded"));
      if (kind == "zero_one") {
        c.loss.kind = LossKind::zero_one;
      } else if (kind != "bounded") {
        fail(ErrorCode::ConfigError, "unknown loss kind '" + kind + "'");
      }
      c.loss.bound = l.value("bound", c.loss.bound);
    }
    if (j.contains("unpaired")) {
      const auto u = j.at("unpaired").get<std::string>();
      if (u == "drop") {
        c.unpaired = UnpairedPolicy::drop;
      } else if (u != "error") {
        fail(ErrorCode::ConfigError, "unpaired must be 'error' or 'drop'");
      }
    }
    if (j.contains("gains")) {
      for (const auto& g : j.at("gains")) {
        check_keys(g, {"agnostic", "conditioned", "variant", "naive_method"}, "gain entry");
        GainPairSpec s;
        s.agnostic = g.at("agnostic").get<std::string>();
        s.conditioned = g.at("conditioned").get<std::string>();
        s.variant = variant_from(g.value("variant", std::string("fam")));
        if (g.contains("naive_method")) s.naive_method = g.at("naive_method").get<std::string>();
        c.gains.push_back(std::move(s));
      }
    }
    if (j.contains("audit")) {
      const auto& a = j.at("audit");
      check_keys(a, {"enabled", "epsilon", "phi1", "phi2"}, "audit");
      c.audit.enabled = a.value("enabled", c.audit.enabled);
      c.audit.epsilon = a.value("epsilon", c.audit.epsilon);
      c.audit.thresholds.phi1 = a.value("phi1", c.audit.thresholds.phi1);
      c.audit.thresholds.phi2 = a.value("phi2", c.audit.thresholds.phi2);
    }
    if (j.contains("output")) c.output = resolve(j.at("output").get<std::string>(), base_dir);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

SignoffConfig SignoffConfig::load(const fs::path& path) {
  return from_json(read_file(path), path.parent_path());
}

std::string SignoffConfig::to_json() const {
  ojson j;
  j["records"] = ojson::array();
  for (const auto& p : records) j["records"].push_back(p.generic_string());
  j["reference_method"] = reference_method;
  j["methods"] = methods;
  if (dataset) j["dataset"] = *dataset;
  if (backbone) j["backbone"] = *backbone;
  if (reference_backbone) j["reference_backbone"] = *reference_backbone;
  j["partitions"] = ojson::array();
  for (const auto& p : partitions) {
    ojson e;
    e["name"] = p.spec.name;
    e["from_labels"] = p.from_labels;
    e["n_min"] = p.spec.n_min;
    e["policy"] = policy_text(p.spec.sparse_policy);
    e["parent"] = p.spec.parent;
    if (!p.from_labels) e["assignment"] = p.spec.assignment;
    j["partitions"].push_back(std::move(e));
  }
  j["deployment_partition"] = deployment_partition;
  j["budgets"] = grid.budgets();
  j["epsilons"] = epsilons;
  j["eps_avg"] = eps_avg;
  j["eps_fam"] = eps_fam;
  j["bootstrap"] = {{"n_boot", bootstrap.n_boot}, {"level", bootstrap.level}, {"seed", bootstrap.seed}};
  j["loss"] = {{"kind", loss.kind == LossKind::zero_one ? "zero_one" : "bounded"}, {"bound", loss.bound}};
  j["unpaired"] = unpaired == UnpairedPolicy::drop ? "drop" : "error";
  j["gains"] = ojson::array();
  for (const auto& g : gains) {
    ojson e;
    e["agnostic"] = g.agnostic;
    e["conditioned"] = g.conditioned;
    e["variant"] = to_string(g.variant);
    if (g.naive_method) e["naive_method"] = *g.naive_method;
    j["gains"].push_back(std::move(e));
  }
  j["audit"] = {{"enabled", audit.enabled},
                {"epsilon", audit.epsilon},
                {"phi1", audit.thresholds.phi1},
                {"phi2", audit.thresholds.phi2}};
  j["output"] = output.generic_string();
  return j.dump(2);
}

void SignoffConfig::validate() const {
  if (reference_method.empty()) fail(ErrorCode::ConfigError, "reference_method is empty");
  if (grid.empty()) fail(ErrorCode::ConfigError, "budget grid is empty");
  if (epsilons.empty()) fail(ErrorCode::ConfigError, "epsilon grid is empty");
  for (double e : epsilons) {
    if (!(e >= 0.0) || !std::isfinite(e)) fail(ErrorCode::ConfigError, "tolerances must be >= 0");
  }
  if (!(eps_avg >= 0.0) || !(eps_fam >= 0.0)) fail(ErrorCode::ConfigError, "eps_avg and eps_fam must be >= 0");
  if (!(loss.bound > 0.0)) fail(ErrorCode::ConfigError, "loss bound must be positive");
  try {
    bootstrap.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, e.what());
  }
  std::set<std::string> names;
  for (const auto& p : partitions) {
    if (p.spec.name.empty()) fail(ErrorCode::ConfigError, "partition without a name");
    if (p.spec.n_min == 0) fail(ErrorCode::ConfigError, "n_min must be positive");
    if (!names.insert(p.spec.name).second) {
      fail(ErrorCode::ConfigError, "partition '" + p.spec.name + "' declared twice");
    }
  }
  if (!partitions.empty() && deployment_partition.empty() && partitions.size() > 1) {
    fail(ErrorCode::ConfigError, "several partitions declared; set deployment_partition");
  }
  if (!partitions.empty() && !deployment_partition.empty() && !names.count(deployment_partition)) {
    fail(ErrorCode::ConfigError, "deployment partition '" + deployment_partition + "' is not declared");
  }
  if (partitions.empty() && deployment_partition.empty()) {
    fail(ErrorCode::ConfigError, "declare a partition or name the deployment partition label");
  }
  for (const auto& g : gains) {
    if (g.agnostic == g.conditioned) fail(ErrorCode::ConfigError, "gain pair compares a method with itself");
  }
  if (!(audit.epsilon >= 0.0)) fail(ErrorCode::ConfigError, "audit epsilon must be >= 0");
  if (!(audit.thresholds.phi1 >= 0.0) || audit.thresholds.phi2 < audit.thresholds.phi1) {
    fail(ErrorCode::ConfigError, "audit thresholds need 0 <= phi1 <= phi2");
  }
}

namespace {

using SeedSet = std::set<std::optional<std::int64_t>>;

struct RunData {
  RunReport report;
  std::vector<PairedDataset> datasets;  // aligned with the grid
};

class Engine {
 public:
  Engine(const SignoffConfig& cfg, const std::vector<EvalRecord>& records) : cfg_(cfg), records_(records) {}

  SignoffReport run(std::string input_hash) {
    resolve_partitions();
    SignoffReport rep;
    SignoffConfig hashed = cfg_;
    hashed.records.clear();
    hashed.output.clear();
    rep.config_hash = to_hex(fnv1a64(hashed.to_json()));
    rep.input_hash = std::move(input_hash);
    rep.seed = cfg_.bootstrap.seed;
    rep.deployment_partition = deployment_;
    rep.grid = cfg_.grid;
    rep.epsilons = cfg_.epsilons;
    rep.eps_avg = cfg_.eps_avg;
    rep.eps_fam = cfg_.eps_fam;

    for (const auto& method : methods()) {
      for (const auto& seed : seeds_of(method, QueryStream::anchor())) {
        auto data = evaluate(method, seed);
        rep.runs.push_back(data.report);
        runs_.emplace(std::make_pair(method, seed), std::move(data));
      }
    }
    for (const auto& g : cfg_.gains) {
      rep.gains.push_back(gain_section(g));
      if (cfg_.audit.enabled) {
        if (auto a = audit_section(g)) rep.audits.push_back(std::move(*a));
      }
    }
    return rep;
  }

 private:
  void resolve_partitions() {
    try {
      if (cfg_.partitions.empty()) {
        PartitionEntry e;
        e.spec.name = cfg_.deployment_partition;
        e.from_labels = true;
        partitions_.push_back(std::move(e.spec));
      } else {
        for (const auto& p : cfg_.partitions) {
          if (p.from_labels) {
            partitions_.push_back(partition_from_labels(records_, p.spec.name, p.spec.n_min,
                                                        p.spec.sparse_policy, p.spec.parent));
          } else {
            partitions_.push_back(p.spec);
          }
        }
      }
      for (const auto& p : partitions_) {
        if (p.assignment.empty()) fail(ErrorCode::UnassignedExample, "partition '" + p.name + "' assigns no example");
      }
    } catch (const Error& e) {
      rethrow_in("partitioning", e);
    }
    deployment_ = cfg_.deployment_partition.empty() ? partitions_.front().name : cfg_.deployment_partition;
  }

  std::vector<std::string> methods() const {
    if (!cfg_.methods.empty()) return cfg_.methods;
    std::set<std::string> found;
    for (const auto& r : records_) {
      if (r.budget.is_raw() || r.method == cfg_.reference_method) continue;
      if (r.query_stream != QueryStream::anchor()) continue;
      if (cfg_.dataset && r.dataset != *cfg_.dataset) continue;
      if (cfg_.backbone && r.backbone != *cfg_.backbone) continue;
      found.insert(r.method);
    }
    return {found.begin(), found.end()};
  }

  SeedSet seeds_of(const std::string& method, const QueryStream& stream) const {
    SeedSet seeds;
    for (const auto& r : records_) {
      if (r.method != method || r.budget.is_raw() || r.query_stream != stream) continue;
      if (cfg_.dataset && r.dataset != *cfg_.dataset) continue;
      if (cfg_.backbone && r.backbone != *cfg_.backbone) continue;
      seeds.insert(r.seed);
    }
    return seeds;
  }

  std::set<int> permuted_streams(const std::string& method, const std::optional<std::int64_t>& seed) const {
    std::set<int> ids;
    for (const auto& r : records_) {
      if (r.method != method || r.budget.is_raw() || r.seed != seed) continue;
      if (cfg_.dataset && r.dataset != *cfg_.dataset) continue;
      if (!r.query_stream.is_anchor()) ids.insert(*r.query_stream.perm_id);
    }
    return ids;
  }

  bool has_method(const std::string& method) const {
    return std::any_of(records_.begin(), records_.end(), [&](const EvalRecord& r) { return r.method == method; });
  }

  std::vector<PairedDataset> pair_grid(const std::string& method, const std::optional<std::int64_t>& seed,
                                       const QueryStream& stream) const {
    std::vector<PairedDataset> out;
    for (double b : cfg_.grid.budgets()) {
      PairingRequest req;
      req.reference_method = cfg_.reference_method;
      req.method = method;
      req.budget = b;
      req.seed = seed;
      req.query_stream = stream;
      req.dataset = cfg_.dataset;
      req.backbone = cfg_.backbone;
      req.reference_backbone = cfg_.reference_backbone;
      req.unpaired = cfg_.unpaired;
      req.loss_bound = cfg_.loss.bound;
      const std::string where = "pairing (method " + method + ", seed " + seed_text(seed) + ", stream " +
                                stream.to_string() + ", budget " + format_double(b) + ")";
      try {
        auto ds = pair_with_reference(records_, req);
        for (const auto& p : partitions_) ds = apply_partition(std::move(ds), p);
        out.push_back(std::move(ds));
      } catch (const Error& e) {
        rethrow_in(where, e);
      }
    }
    return out;
  }

  RunData evaluate(const std::string& method, const std::optional<std::int64_t>& seed) const {
    RunData data;
    RunReport& run = data.report;
    run.method = method;
    run.seed = seed;
    data.datasets = pair_grid(method, seed, QueryStream::anchor());
    const std::string where = "estimation (method " + method + ", seed " + seed_text(seed) + ")";
    try {
      run.avg_curve = build_curve(data.datasets, cfg_.grid, Variant::avg, {}, cfg_.bootstrap);
      run.fam_curve = build_curve(data.datasets, cfg_.grid, Variant::fam, deployment_, cfg_.bootstrap);
      for (std::size_t i = 0; i < cfg_.grid.size(); ++i) {
        const auto& ds = data.datasets[i];
        BudgetCell cell;
        cell.budget = cfg_.grid[i];
        cell.n_pairs = ds.size();
        cell.n_dropped = ds.dropped.size();
        for (const auto& p : partitions_) cell.summaries[p.name] = family_excess_table(ds, p.name);
        const auto& dep = cell.summaries.at(deployment_);
        cell.avg = with_boot(interval_from(run.avg_curve.values[i]));
        cell.fam = with_boot(interval_from(run.fam_curve.values[i]));
        cell.w2 = worst2_concentration(dep);
        cell.decision = signoff_decision(cell.avg, cell.fam, cfg_.eps_avg, cfg_.eps_fam, cell.budget);
        if (dep.worst_family) cell.decision.worst_family = dep.worst_family->family;
        cell.decision.hidden_damage = dep.hidden_damage;
        if (dep.all_inconclusive) cell.decision.notes.emplace_back("every family is inconclusive");
        for (const auto& [name, stat] : dep.per_family) {
          if (stat.inconclusive) cell.decision.notes.push_back("family '" + name + "' is inconclusive");
        }
        run.cells.push_back(std::move(cell));
      }
      std::set<std::string> families;
      for (const auto& c : run.cells) {
        for (const auto& [name, stat] : c.summaries.at(deployment_).per_family) families.insert(name);
      }
      for (double eps : cfg_.epsilons) {
        FrontierRow row;
        row.epsilon = eps;
        row.avg_point = point_frontier(run.avg_curve, eps);
        row.avg_certified = certified_frontier(run.avg_curve, eps);
        row.fam_point = point_frontier(run.fam_curve, eps);
        row.fam_certified = certified_frontier(run.fam_curve, eps);
        for (const auto& f : families) row.family_point[f] = family_frontier(run, f, eps);
        run.frontiers.push_back(std::move(row));
      }
      for (const auto& c : run.cells) {
        if (c.decision.outcome == Outcome::accept) {
          run.recommended_budget = c.budget;
          break;
        }
      }
      for (const auto& f : families) {
        const auto& last = run.cells.back().summaries.at(deployment_).per_family;
        auto it = last.find(f);
        if (it != last.end() && it->second.inconclusive) continue;
        if (std::isinf(family_frontier(run, f, cfg_.eps_fam))) run.failing_families.push_back(f);
      }
    } catch (const Error& e) {
      rethrow_in(where, e);
    }
    return data;
  }

  double family_frontier(const RunReport& run, const std::string& family, double eps) const {
    std::vector<double> values;
    for (const auto& c : run.cells) {
      const auto& pf = c.summaries.at(deployment_).per_family;
      auto it = pf.find(family);
      values.push_back(it == pf.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.mean);
    }
    return grid_frontier(cfg_.grid, values, eps);
  }

  static IntervalEstimate interval_from(const CurvePoint& p) { return {p.point, p.lo, p.hi}; }

  IntervalEstimate with_boot(IntervalEstimate e) const {
    e.n_boot = cfg_.bootstrap.n_boot;
    e.seed = cfg_.bootstrap.seed;
    e.level = cfg_.bootstrap.level;
    return e;
  }

  std::string partition_of(Variant v) const { return v == Variant::fam ? deployment_ : std::string(); }

  ExcessCurve curve_of(const std::vector<PairedDataset>& datasets, Variant v) const {
    std::vector<double> values;
    for (const auto& ds : datasets) {
      FamilyTable t(ds, partition_of(v));
      values.push_back(v == Variant::avg ? t.avg() : t.worst());
    }
    return point_curve(cfg_.grid, values, v, partition_of(v));
  }

  // Agnostic run matched to a conditioned seed: same seed, else the only agnostic run.
  const RunData* agnostic_for(const std::string& agnostic, const std::optional<std::int64_t>& seed) const {
    auto it = runs_.find({agnostic, seed});
    if (it != runs_.end()) return &it->second;
    const RunData* only = nullptr;
    std::size_t count = 0;
    for (const auto& [key, data] : runs_) {
      if (key.first == agnostic) {
        only = &data;
        ++count;
      }
    }
    return count == 1 ? only : nullptr;
  }

  GainReport gain_section(const GainPairSpec& g) const {
    GainReport rep;
    rep.pair = g;
    const std::string where = "conditioned gain (" + g.agnostic + " vs " + g.conditioned + ")";
    try {
      for (const auto& [key, cond] : runs_) {
        if (key.first != g.conditioned) continue;
        const RunData* agn = agnostic_for(g.agnostic, key.second);
        if (!agn) continue;
        GainSeedRow row;
        row.seed = key.second;
        const auto ca = curve_of(agn->datasets, g.variant);
        const auto cc = curve_of(cond.datasets, g.variant);
        std::vector<FamilyTable> ta;
        std::vector<FamilyTable> tc;
        for (const auto& ds : agn->datasets) ta.emplace_back(ds, partition_of(g.variant));
        for (const auto& ds : cond.datasets) tc.emplace_back(ds, partition_of(g.variant));
        for (double eps : cfg_.epsilons) {
          row.per_epsilon.push_back(conditioned_gain(ca, cc, eps));
          try {
            auto stat = conditioned_gain_statistic(ta, tc, cfg_.grid, g.variant, eps);
            row.tests.push_back(paired_gain_bootstrap(agn->datasets, cond.datasets, stat, cfg_.bootstrap));
          } catch (const Error& e) {
            if (e.code() != ErrorCode::UniverseMismatch) throw;
            row.tests.push_back(std::nullopt);
          }
        }
        rep.seeds.push_back(std::move(row));
      }
      if (rep.seeds.empty()) {
        fail(ErrorCode::ConfigError, "no matching runs for methods '" + g.agnostic + "' and '" + g.conditioned + "'");
      }
      for (std::size_t e = 0; e < cfg_.epsilons.size(); ++e) {
        std::vector<double> finite;
        for (const auto& row : rep.seeds) {
          if (std::isfinite(row.per_epsilon[e].gain)) finite.push_back(row.per_epsilon[e].gain);
        }
        if (finite.size() >= 2) {
          rep.across_seeds.push_back(seed_t_interval(finite, cfg_.bootstrap.level));
        } else {
          rep.across_seeds.push_back(std::nullopt);
        }
      }
    } catch (const Error& e) {
      rethrow_in(where, e);
    }
    return rep;
  }

  // Frontier gain at the audit tolerance for each permuted stream of `method`.
  std::optional<AuditResult> audit_one(const GainPairSpec& g, const RunData& agn, double anchor_gain,
                                       const std::string& method, const std::optional<std::int64_t>& seed,
                                       std::vector<std::string>& notes) const {
    const auto streams = permuted_streams(method, seed);
    if (streams.empty()) return std::nullopt;
    const auto fa = point_frontier(curve_of(agn.datasets, g.variant), cfg_.audit.epsilon).budget;
    std::vector<double> gains;
    for (int k : streams) {
      const auto ds = pair_grid(method, seed, QueryStream::permuted(k));
      const auto fc = point_frontier(curve_of(ds, g.variant), cfg_.audit.epsilon).budget;
      gains.push_back(gain_from_frontiers(fa, fc));
    }
    const bool finite = std::isfinite(anchor_gain) &&
                        std::all_of(gains.begin(), gains.end(), [](double v) { return std::isfinite(v); });
    if (!finite) {
      notes.push_back(method + ": an infeasible frontier leaves the audit delta undefined");
      return std::nullopt;
    }
    return decoupled_audit(anchor_gain, gains, cfg_.audit.thresholds);
  }

  std::optional<AuditReport> audit_section(const GainPairSpec& g) const {
    AuditReport rep;
    rep.pair = g;
    rep.epsilon = cfg_.audit.epsilon;
    const std::string naive = g.naive_method ? *g.naive_method : g.conditioned + ".naive";
    const bool naive_present = has_method(naive);
    bool any_permuted = false;
    try {
      for (const auto& [key, cond] : runs_) {
        if (key.first != g.conditioned) continue;
        const RunData* agn = agnostic_for(g.agnostic, key.second);
        if (!agn) continue;
        if (permuted_streams(g.conditioned, key.second).empty()) continue;
        any_permuted = true;
        AuditSeedRow row;
        row.seed = key.second;
        const double fa = point_frontier(curve_of(agn->datasets, g.variant), cfg_.audit.epsilon).budget;
        const double fc = point_frontier(curve_of(cond.datasets, g.variant), cfg_.audit.epsilon).budget;
        const double anchor = gain_from_frontiers(fa, fc);
        row.decoupled = audit_one(g, *agn, anchor, g.conditioned, key.second, row.notes);
        if (naive_present) row.naive = audit_one(g, *agn, anchor, naive, key.second, row.notes);
        rep.seeds.push_back(std::move(row));
      }
    } catch (const Error& e) {
      rethrow_in("audit (" + g.conditioned + ")", e);
    }
    if (!any_permuted) return std::nullopt;
    std::vector<double> deltas;
    std::vector<double> naive_deltas;
    for (const auto& row : rep.seeds) {
      if (row.decoupled) deltas.push_back(row.decoupled->delta);
      if (row.naive) naive_deltas.push_back(row.naive->delta);
    }
    if (!deltas.empty()) {
      const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / static_cast<double>(deltas.size());
      rep.mean_delta = mean;
      rep.band = audit_band(mean, cfg_.audit.thresholds);
      if (deltas.size() >= 2) {
        double ss = 0.0;
        for (double d : deltas) ss += (d - mean) * (d - mean);
        rep.sd_delta = std::sqrt(ss / static_cast<double>(deltas.size() - 1));
      }
    }
    if (!naive_deltas.empty()) {
      rep.mean_naive_delta =
          std::accumulate(naive_deltas.begin(), naive_deltas.end(), 0.0) / static_cast<double>(naive_deltas.size());
    }
    return rep;
  }

  const SignoffConfig& cfg_;
  const std::vector<EvalRecord>& records_;
  std::vector<PartitionSpec> partitions_;
  std::string deployment_;
  std::map<std::pair<std::string, std::optional<std::int64_t>>, RunData> runs_;
};

std::string serialize(const std::vector<EvalRecord>& records) {
  std::ostringstream out;
  write_records(out, records, RecordFormat::jsonl);
  return out.str();
}

}  // namespace

SignoffReport run_signoff(const SignoffConfig& cfg, const std::vector<EvalRecord>& records) {
  cfg.validate();
  return Engine(cfg, records).run(to_hex(fnv1a64(serialize(records))));
}

SignoffReport run_signoff(const SignoffConfig& cfg) {
  cfg.validate();
  if (cfg.records.empty()) fail(ErrorCode::ConfigError, "no record files configured");
  std::vector<EvalRecord> records;
  std::uint64_t h = fnv1a64("");
  for (const auto& path : cfg.records) {
    std::string text;
    try {
      text = read_file(path);
      std::istringstream in(text);
      auto part = parse_records(in, format_from_path(path), cfg.loss);
      records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    } catch (const Error& e) {
      rethrow_in("ingestion (" + path.filename().string() + ")", e);
    }
    h = fnv1a64(text, h);
  }
  return Engine(cfg, records).run(to_hex(h));
}

std::string SignoffReport::to_json() const {
  ojson j;
  j["provenance"] = {{"tool", "apsign"}, {"version", version}, {"config_hash", config_hash},
                     {"input_hash", input_hash}, {"bootstrap_seed", seed}};
  j["specification"] = {{"deployment_partition", deployment_partition},
                        {"budgets", grid.budgets()},
                        {"epsilons", epsilons},
                        {"eps_avg", eps_avg},
                        {"eps_fam", eps_fam}};
  j["runs"] = ojson::array();
  for (const auto& run : runs) {
    ojson r;
    r["method"] = run.method;
    r["seed"] = run.seed ? ojson(*run.seed) : ojson(nullptr);
    r["budgets"] = ojson::array();
    for (const auto& c : run.cells) {
      ojson cell;
      cell["budget"] = c.budget;
      cell["n_pairs"] = c.n_pairs;
      cell["n_dropped"] = c.n_dropped;
      cell["avg"] = interval_json(c.avg);
      cell["fam"] = interval_json(c.fam);
      cell["w2"] = c.w2 ? num(*c.w2) : ojson(nullptr);
      ojson parts;
      for (const auto& [name, s] : c.summaries) {
        ojson p;
        p["avg_excess"] = num(s.avg_excess);
        p["worst_family"] = s.worst_family ? ojson(s.worst_family->family) : ojson(nullptr);
        p["worst_value"] = s.worst_family ? num(s.worst_family->value) : ojson(nullptr);
        p["hidden_damage"] = num(s.hidden_damage);
        p["hidden_damage_pp"] = num(to_points(s.hidden_damage));
        p["all_inconclusive"] = s.all_inconclusive;
        ojson fams;
        for (const auto& [f, st] : s.per_family) {
          fams[f] = {{"mean", num(st.mean)}, {"count", st.count}, {"inconclusive", st.inconclusive}};
        }
        p["families"] = std::move(fams);
        parts[name] = std::move(p);
      }
      cell["partitions"] = std::move(parts);
      ojson d;
      d["outcome"] = to_string(c.decision.outcome);
      d["worst_family"] = c.decision.worst_family;
      d["hidden_damage"] = num(c.decision.hidden_damage);
      d["notes"] = c.decision.notes;
      cell["decision"] = std::move(d);
      r["budgets"].push_back(std::move(cell));
    }
    r["frontiers"] = ojson::array();
    for (const auto& f : run.frontiers) {
      ojson row;
      row["epsilon"] = f.epsilon;
      row["avg_point"] = frontier_json(f.avg_point.budget);
      row["avg_certified"] = frontier_json(f.avg_certified.budget);
      row["fam_point"] = frontier_json(f.fam_point.budget);
      row["fam_certified"] = frontier_json(f.fam_certified.budget);
      ojson fams;
      for (const auto& [name, b] : f.family_point) fams[name] = frontier_json(b);
      row["family_point"] = std::move(fams);
      r["frontiers"].push_back(std::move(row));
    }
    r["action"] = {{"recommended_budget", run.recommended_budget ? ojson(*run.recommended_budget) : ojson(nullptr)},
                   {"failing_families", run.failing_families}};
    j["runs"].push_back(std::move(r));
  }
  j["conditioned_gain"] = ojson::array();
  for (const auto& g : gains) {
    ojson e;
    e["agnostic"] = g.pair.agnostic;
    e["conditioned"] = g.pair.conditioned;
    e["variant"] = to_string(g.pair.variant);
    e["seeds"] = ojson::array();
    for (const auto& row : g.seeds) {
      ojson s;
      s["seed"] = row.seed ? ojson(*row.seed) : ojson(nullptr);
      s["epsilons"] = ojson::array();
      for (std::size_t i = 0; i < row.per_epsilon.size(); ++i) {
        const auto& gr = row.per_epsilon[i];
        ojson x;
        x["epsilon"] = gr.agnostic.epsilon;
        x["gain"] = num(gr.gain);
        x["agnostic_frontier"] = frontier_json(gr.agnostic.budget);
        x["conditioned_frontier"] = frontier_json(gr.conditioned.budget);
        x["both_infeasible"] = gr.both_infeasible;
        x["one_infeasible"] = gr.one_infeasible;
        if (row.tests[i]) {
          x["interval"] = interval_json(row.tests[i]->interval);
          x["p"] = row.tests[i]->p;
          x["p_below_floor"] = row.tests[i]->p_below_floor;
        }
        s["epsilons"].push_back(std::move(x));
      }
      e["seeds"].push_back(std::move(s));
    }
    e["across_seeds"] = ojson::array();
    for (const auto& a : g.across_seeds) e["across_seeds"].push_back(a ? interval_json(*a) : ojson(nullptr));
    j["conditioned_gain"].push_back(std::move(e));
  }
  j["audit"] = ojson::array();
  for (const auto& a : audits) {
    ojson e;
    e["agnostic"] = a.pair.agnostic;
    e["conditioned"] = a.pair.conditioned;
    e["epsilon"] = a.epsilon;
    e["seeds"] = ojson::array();
    auto audit_json = [](const std::optional<AuditResult>& r) -> ojson {
      if (!r) return nullptr;
      return {{"anchor", num(r->anchor)},
              {"permuted_mean", num(r->permuted_mean)},
              {"delta", num(r->delta)},
              {"band", to_string(r->band)},
              {"n_permutations", r->n_permutations}};
    };
    for (const auto& row : a.seeds) {
      ojson s;
      s["seed"] = row.seed ? ojson(*row.seed) : ojson(nullptr);
      s["decoupled"] = audit_json(row.decoupled);
      s["naive"] = audit_json(row.naive);
      s["notes"] = row.notes;
      e["seeds"].push_back(std::move(s));
    }
    e["mean_delta"] = a.mean_delta ? num(*a.mean_delta) : ojson(nullptr);
    e["sd_delta"] = a.sd_delta ? num(*a.sd_delta) : ojson(nullptr);
    e["band"] = a.band ? ojson(to_string(*a.band)) : ojson(nullptr);
    e["mean_naive_delta"] = a.mean_naive_delta ? num(*a.mean_naive_delta) : ojson(nullptr);
    j["audit"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string SignoffReport::summary_text() const {
  std::ostringstream out;
  auto iv = [](const IntervalEstimate& e) {
    if (std::isnan(e.point)) return std::string("NA");
    return format_fixed(e.point, 4) + " [" + format_fixed(e.lo, 4) + ", " + format_fixed(e.hi, 4) + "]";
  };
  out << "sign-off  partition=" << deployment_partition << "  eps_avg=" << format_double(eps_avg)
      << "  eps_fam=" << format_double(eps_fam) << "  config=" << config_hash << "  input=" << input_hash << "\n";
  for (const auto& run : runs) {
    out << "\n" << run.method << "  seed " << seed_text(run.seed) << "\n";
    for (const auto& c : run.cells) {
      out << "  b=" << format_double(c.budget) << "  avg " << iv(c.avg) << "  fam " << iv(c.fam) << "  worst "
          << (c.decision.worst_family.empty() ? "-" : c.decision.worst_family) << "  margin "
          << (std::isnan(c.decision.hidden_damage) ? std::string("NA")
                                                    : format_fixed(to_points(c.decision.hidden_damage), 2) + " pp")
          << "  " << to_string(c.decision.outcome) << "\n";
    }
    for (const auto& f : run.frontiers) {
      out << "  eps=" << format_double(f.epsilon) << "  avg " << f.avg_point.budget_text() << "/"
          << f.avg_certified.budget_text() << "  fam " << f.fam_point.budget_text() << "/"
          << f.fam_certified.budget_text() << "  (point/certified)\n";
    }
    out << "  recommended budget: "
        << (run.recommended_budget ? format_double(*run.recommended_budget) : std::string("none")) << "\n";
    if (!run.failing_families.empty()) {
      out << "  failing families:";
      for (const auto& f : run.failing_families) out << " " << f;
      out << "\n";
    }
  }
  for (const auto& g : gains) {
    out << "\ngain " << g.pair.agnostic << " -> " << g.pair.conditioned << " (" << to_string(g.pair.variant) << ")\n";
    for (const auto& row : g.seeds) {
      for (std::size_t i = 0; i < row.per_epsilon.size(); ++i) {
        out << "  seed " << seed_text(row.seed) << "  eps=" << format_double(epsilons[i]) << "  G="
            << csv_num(row.per_epsilon[i].gain);
        if (row.tests[i]) out << "  p=" << format_double(row.tests[i]->p);
        out << "\n";
      }
    }
  }
  for (const auto& a : audits) {
    out << "\naudit " << a.pair.conditioned << " at eps=" << format_double(a.epsilon) << ": ";
    if (a.mean_delta) {
      out << "delta " << format_fixed(*a.mean_delta, 4) << "  " << to_string(*a.band);
    } else {
      out << "undefined";
    }
    if (a.mean_naive_delta) out << "  naive delta " << format_fixed(*a.mean_naive_delta, 4);
    out << "\n";
  }
  return out.str();
}

void export_curves(const SignoffReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create '" + dir.string() + "': " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write '" + (dir / name).string() + "'");
    return out;
  };
  {
    auto out = open("curves.csv");
    out << "method,seed,budget,avg_point,avg_lo,avg_hi,fam_point,fam_lo,fam_hi,hidden_margin,worst_family,"
           "decision\n";
    for (const auto& run : report.runs) {
      for (const auto& c : run.cells) {
        out << run.method << "," << seed_text(run.seed) << "," << format_double(c.budget) << ","
            << csv_num(c.avg.point) << "," << csv_num(c.avg.lo) << "," << csv_num(c.avg.hi) << ","
            << csv_num(c.fam.point) << "," << csv_num(c.fam.lo) << "," << csv_num(c.fam.hi) << ","
            << csv_num(c.decision.hidden_damage) << "," << c.decision.worst_family << ","
            << to_string(c.decision.outcome) << "\n";
      }
    }
  }
  {
    auto out = open("frontiers.csv");
    out << "method,seed,epsilon,avg_point,avg_certified,fam_point,fam_certified\n";
    for (const auto& run : report.runs) {
      for (const auto& f : run.frontiers) {
        out << run.method << "," << seed_text(run.seed) << "," << format_double(f.epsilon) << ","
            << csv_frontier(f.avg_point.budget) << "," << csv_frontier(f.avg_certified.budget) << ","
            << csv_frontier(f.fam_point.budget) << "," << csv_frontier(f.fam_certified.budget) << "\n";
      }
    }
  }
  {
    auto out = open("family_frontiers.csv");
    out << "method,seed,family,epsilon,point_frontier\n";
    for (const auto& run : report.runs) {
      for (const auto& f : run.frontiers) {
        for (const auto& [name, b] : f.family_point) {
          out << run.method << "," << seed_text(run.seed) << "," << name << "," << format_double(f.epsilon) << ","
              << csv_frontier(b) << "\n";
        }
      }
    }
  }
  {
    auto out = open("gains.csv");
    out << "agnostic,conditioned,variant,seed,epsilon,gain,agnostic_frontier,conditioned_frontier,lo,hi,p\n";
    for (const auto& g : report.gains) {
      for (const auto& row : g.seeds) {
        for (std::size_t i = 0; i < row.per_epsilon.size(); ++i) {
          const auto& r = row.per_epsilon[i];
          out << g.pair.agnostic << "," << g.pair.conditioned << "," << to_string(g.pair.variant) << ","
              << seed_text(row.seed) << "," << format_double(r.agnostic.epsilon) << "," << csv_num(r.gain) << ","
              << csv_frontier(r.agnostic.budget) << "," << csv_frontier(r.conditioned.budget) << ",";
          if (row.tests[i]) {
            out << csv_num(row.tests[i]->interval.lo) << "," << csv_num(row.tests[i]->interval.hi) << ","
                << format_double(row.tests[i]->p);
          } else {
            out << "NA,NA,NA";
          }
          out << "\n";
        }
      }
    }
  }
}

}  // namespace apsign
