#include "apsign/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "apsign/error.hpp"
#include "apsign/rng.hpp"
#include "apsign/util.hpp"

namespace apsign::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> top_k(std::span<const double> score, std::size_t k) {
  std::vector<std::size_t> idx(score.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Keeps `preferred` (ascending, in range) first, then the smallest unused indices.
std::vector<std::size_t> fill_to(std::vector<std::size_t> preferred, std::size_t n, std::size_t k) {
  std::sort(preferred.begin(), preferred.end());
  preferred.erase(std::unique(preferred.begin(), preferred.end()), preferred.end());
  preferred.erase(std::remove_if(preferred.begin(), preferred.end(), [&](std::size_t i) { return i >= n; }),
                  preferred.end());
  if (preferred.size() > k) preferred.resize(k);
  std::vector<char> used(n, 0);
  for (auto i : preferred) used[i] = 1;
  for (std::size_t i = 0; i < n && preferred.size() < k; ++i) {
    if (!used[i]) preferred.push_back(i);
  }
  std::sort(preferred.begin(), preferred.end());
  return preferred;
}

bool contains_all(std::span<const std::size_t> kept, std::span<const std::size_t> required) {
  for (auto r : required) {
    if (!std::binary_search(kept.begin(), kept.end(), r)) return false;
  }
  return true;
}

std::vector<std::string> shuffled(std::vector<std::string> ids, CounterRng& rng) {
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[rng.bounded(i)]);
  }
  return ids;
}

}  // namespace

ChunkedClip ChunkedClip::from_scores(std::string id, std::span<const double> scores) {
  ChunkedClip c;
  c.clip_id = std::move(id);
  for (double s : scores) c.chunks.push_back({s});
  return c;
}

ChunkedClip normalize_clip(ChunkedClip clip) {
  if (clip.chunks.size() > kMaxChunks) clip.chunks.resize(kMaxChunks);
  if (clip.chunks.empty()) clip.chunks.push_back({0.0});
  return clip;
}

double rms(std::span<const double> frame) {
  if (frame.empty()) return 0.0;
  double s = 0.0;
  for (double v : frame) s += v * v;
  return std::sqrt(s / static_cast<double>(frame.size()));
}

std::string_view to_string(SelectorKind k) noexcept {
  switch (k) {
    case SelectorKind::uniform: return "uniform";
    case SelectorKind::random: return "random";
    case SelectorKind::energy: return "energy";
    case SelectorKind::planted_oracle: return "planted_oracle";
    case SelectorKind::conditioned_toy: return "conditioned_toy";
  }
  return "uniform";
}

SelectorKind selector_kind_from_string(std::string_view text) {
  for (auto k : {SelectorKind::uniform, SelectorKind::random, SelectorKind::energy,
                 SelectorKind::planted_oracle, SelectorKind::conditioned_toy}) {
    if (text == to_string(k)) return k;
  }
  fail(ErrorCode::ConfigError, "unknown selector '" + std::string(text) + "'");
}

std::size_t retained_count(double b, std::size_t n) {
  if (n == 0) fail(ErrorCode::InvalidArgument, "clip has no chunks");
  if (!(b > 0.0) || b > 1.0 + kBudgetTolerance) {
    fail(ErrorCode::InvalidArgument, "budget must lie in (0,1], got " + format_double(b));
  }
  if (b >= 1.0 - kBudgetTolerance) return n;
  const auto k = static_cast<std::size_t>(std::floor(b * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> select_chunks(const ChunkedClip& clip, const Selector& sel, double b,
                                       const std::optional<std::string>& query) {
  const std::size_t n = clip.size();
  const std::size_t k = retained_count(b, n);
  switch (sel.kind) {
    case SelectorKind::uniform: {
      std::vector<std::size_t> idx;
      for (std::size_t j = 0; j < k; ++j) idx.push_back(j * n / k);
      return fill_to(std::move(idx), n, k);
    }
    case SelectorKind::random: {
      CounterRng rng(sel.seed, fnv1a64(clip.clip_id));
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.bounded(i)]);
      perm.resize(k);
      std::sort(perm.begin(), perm.end());
      return perm;
    }
    case SelectorKind::energy: {
      std::vector<double> score;
      for (const auto& c : clip.chunks) score.push_back(rms(c));
      return top_k(score, k);
    }
    case SelectorKind::planted_oracle:
      return fill_to(sel.target, n, k);
    case SelectorKind::conditioned_toy: {
      if (!query) fail(ErrorCode::MissingQuery, "conditioned selector needs a query");
      auto it = sel.scores.find(*query);
      if (it == sel.scores.end()) fail(ErrorCode::MissingQuery, "no score table for query '" + *query + "'");
      std::vector<double> score(n, 0.0);
      for (std::size_t i = 0; i < n && i < it->second.size(); ++i) score[i] = it->second[i];
      return top_k(score, k);
    }
  }
  return {};
}

double topk_jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::set<std::size_t> sa(a.begin(), a.end());
  std::set<std::size_t> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (auto i : sa) inter += sb.count(i);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::map<std::string, std::string> permute_query_stream(const std::map<std::string, std::string>& assignment,
                                                        PermutationMode mode, std::uint64_t perm_seed) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [id, fam] : assignment) {
    groups[mode == PermutationMode::global ? std::string() : fam].push_back(id);
  }
  std::map<std::string, std::string> sigma;
  std::uint64_t stream = 0;
  for (const auto& [key, ids] : groups) {
    std::vector<std::string> image = ids;
    if (ids.size() > 1) {
      do {
        CounterRng rng(perm_seed, stream++);
        image = shuffled(ids, rng);
      } while (image == ids);
    }
    for (std::size_t i = 0; i < ids.size(); ++i) sigma[ids[i]] = image[i];
  }
  return sigma;
}

void PlantedWorld::validate() const {
  if (clips.empty()) fail(ErrorCode::InvalidArgument, "world has no clips");
  if (examples.empty()) fail(ErrorCode::InvalidArgument, "world has no examples");
  std::set<std::string> ids;
  for (const auto& c : clips) {
    if (c.chunks.empty() || c.chunks.size() > kMaxChunks) {
      fail(ErrorCode::InvalidArgument, "clip '" + c.clip_id + "' must have 1.." +
                                           std::to_string(kMaxChunks) + " chunks");
    }
  }
  for (const auto& [fam, sets] : required) {
    if (sets.size() != clips.size()) {
      fail(ErrorCode::InvalidArgument, "family '" + fam + "' needs one required set per clip");
    }
  }
  for (const auto& e : examples) {
    if (!ids.insert(e.example_id).second) {
      fail(ErrorCode::DuplicateKey, "example '" + e.example_id + "' repeated in world");
    }
    if (e.clip >= clips.size()) fail(ErrorCode::InvalidArgument, "example '" + e.example_id + "' has no clip");
    auto it = required.find(e.family);
    if (it == required.end()) {
      fail(ErrorCode::UnknownFamily, "family '" + e.family + "' has no required sets");
    }
    const auto& s = it->second[e.clip];
    if (s.empty()) fail(ErrorCode::InvalidArgument, "empty required set for '" + e.example_id + "'");
    for (auto i : s) {
      if (i >= clips[e.clip].size()) {
        fail(ErrorCode::InvalidArgument, "required chunk out of range for '" + e.example_id + "'");
      }
    }
  }
}

std::map<std::string, std::string> PlantedWorld::assignment() const {
  std::map<std::string, std::string> a;
  for (const auto& e : examples) a[e.example_id] = e.family;
  return a;
}

std::string naive_method_name(std::string_view method) { return std::string(method) + ".naive"; }

namespace {

struct Runner {
  const PlantedWorld& world;

  std::vector<std::size_t> required_sorted(const std::string& family, std::size_t clip) const {
    auto s = world.required.at(family)[clip];
    std::sort(s.begin(), s.end());
    return s;
  }

  // Selection for one example when the selector is shown `query_family`.
  std::vector<std::size_t> select(const SimMethod& m, std::int64_t run_seed, const WorldExample& e,
                                  const std::string& query_family, double b) const {
    const ChunkedClip& clip = world.clips[e.clip];
    Selector sel = m.selector;
    if (sel.kind == SelectorKind::random) {
      sel.seed = splitmix64_mix(sel.seed ^ static_cast<std::uint64_t>(run_seed));
    }
    if (sel.kind == SelectorKind::planted_oracle && sel.target.empty()) {
      sel.target = world.required.at(query_family)[e.clip];
    }
    if (sel.kind == SelectorKind::conditioned_toy && sel.scores.empty()) {
      std::vector<double> score(clip.size(), 0.0);
      for (auto i : world.required.at(query_family)[e.clip]) score[i] = 1.0;
      sel.scores[query_family] = std::move(score);
    }
    return select_chunks(clip, sel, b, query_family);
  }
};

}  // namespace

Simulation planted_world_generate(const PlantedWorld& world, std::span<const SimMethod> methods,
                                  const GenerateOptions& options) {
  world.validate();
  if (options.grid.empty()) fail(ErrorCode::InvalidArgument, "simulation needs a budget grid");
  if (options.seeds.empty()) fail(ErrorCode::InvalidArgument, "simulation needs at least one seed");
  if (options.permutations > 10) fail(ErrorCode::InvalidArgument, "at most 10 permutations per seed");
  std::set<std::string> names;
  for (const auto& m : methods) {
    if (m.name.empty() || m.name == options.reference_method || !names.insert(m.name).second) {
      fail(ErrorCode::InvalidArgument, "method names must be unique and differ from the reference");
    }
  }

  Runner run{world};
  Simulation out;
  std::vector<const WorldExample*> examples;
  for (const auto& e : world.examples) examples.push_back(&e);
  std::sort(examples.begin(), examples.end(),
            [](const WorldExample* a, const WorldExample* b) { return a->example_id < b->example_id; });
  const auto assignment = world.assignment();

  auto base_record = [&](const WorldExample& e) {
    EvalRecord r;
    r.example_id = e.example_id;
    r.dataset = world.dataset;
    r.backbone = options.backbone;
    r.family_labels[world.partition] = e.family;
    r.source_id = world.clips[e.clip].clip_id;
    return r;
  };

  for (const auto* e : examples) {
    EvalRecord r = base_record(*e);
    r.method = options.reference_method;
    r.budget = Budget::raw();
    r.loss = 0.0;
    out.records.push_back(std::move(r));
  }

  std::set<std::string> families;
  for (const auto& [id, fam] : assignment) families.insert(fam);

  for (const auto& m : methods) {
    for (std::int64_t seed : options.seeds) {
      // Anchor stream plus the oracle from the same selections.
      std::map<std::string, std::vector<double>> fam_values;
      std::vector<double> avg_values;
      std::vector<double> worst_values;
      for (double b : options.grid.budgets()) {
        std::map<std::string, std::pair<double, std::size_t>> acc;
        double total = 0.0;
        for (const auto* e : examples) {
          const auto kept = run.select(m, seed, *e, e->family, b);
          const double loss = contains_all(kept, run.required_sorted(e->family, e->clip)) ? 0.0 : 1.0;
          EvalRecord r = base_record(*e);
          r.method = m.name;
          r.seed = seed;
          r.budget = Budget::fraction(b);
          r.loss = loss;
          r.num_audio_tokens = static_cast<double>(kept.size());
          out.records.push_back(std::move(r));
          acc[e->family].first += loss;
          acc[e->family].second += 1;
          total += loss;
        }
        double worst = -kInf;
        for (const auto& fam : families) {
          const double mean = acc[fam].first / static_cast<double>(acc[fam].second);
          fam_values[fam].push_back(mean);
          worst = std::max(worst, mean);
        }
        avg_values.push_back(total / static_cast<double>(examples.size()));
        worst_values.push_back(worst);
      }
      auto frontier = [&](const std::vector<double>& v, double eps) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (v[i] <= eps) return options.grid[i];
        }
        return kInf;
      };
      for (double eps : options.epsilons) {
        out.oracle.push_back({m.name, seed, std::string(kAvgScope), eps, frontier(avg_values, eps)});
        out.oracle.push_back({m.name, seed, std::string(kFamScope), eps, frontier(worst_values, eps)});
        for (const auto& fam : families) {
          out.oracle.push_back({m.name, seed, fam, eps, frontier(fam_values[fam], eps)});
        }
      }

      for (std::size_t k = 1; k <= options.permutations; ++k) {
        const std::uint64_t perm_seed =
            fnv1a64("perm:" + std::to_string(seed) + ":" + std::to_string(k));
        const auto sigma = permute_query_stream(assignment, options.permutation_mode, perm_seed);
        for (double b : options.grid.budgets()) {
          for (const auto* e : examples) {
            const std::string& shown = assignment.at(sigma.at(e->example_id));
            const auto kept = run.select(m, seed, *e, shown, b);
            const bool covered = contains_all(kept, run.required_sorted(e->family, e->clip));
            EvalRecord r = base_record(*e);
            r.method = m.name;
            r.seed = seed;
            r.budget = Budget::fraction(b);
            r.query_stream = QueryStream::permuted(static_cast<int>(k));
            r.loss = covered ? 0.0 : 1.0;
            r.num_audio_tokens = static_cast<double>(kept.size());
            if (options.naive_runs) {
              EvalRecord naive = r;
              naive.method = naive_method_name(m.name);
              naive.loss = shown != e->family || !covered ? 1.0 : 0.0;
              out.records.push_back(std::move(naive));
            }
            out.records.push_back(std::move(r));
          }
        }
      }
    }
  }
  return out;
}

WorldSpec parse_world_spec(std::string_view json_text) {
  using json = nlohmann::json;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigError, std::string("world file is not valid JSON: ") + e.what());
  }
  WorldSpec spec;
  PlantedWorld& w = spec.world;
  GenerateOptions& o = spec.options;
  try {
    w.dataset = j.value("dataset", w.dataset);
    w.partition = j.value("partition", w.partition);
    std::map<std::string, std::size_t> clip_index;
    for (const auto& c : j.at("clips")) {
      ChunkedClip clip;
      if (c.contains("chunks")) {
        clip.clip_id = c.at("id").get<std::string>();
        clip.chunks = c.at("chunks").get<std::vector<std::vector<double>>>();
      } else {
        const auto scores = c.at("scores").get<std::vector<double>>();
        clip = ChunkedClip::from_scores(c.at("id").get<std::string>(), scores);
      }
      if (!clip_index.emplace(clip.clip_id, w.clips.size()).second) {
        fail(ErrorCode::DuplicateKey, "clip '" + clip.clip_id + "' repeated in world");
      }
      w.clips.push_back(normalize_clip(std::move(clip)));
    }
    w.required = j.at("required").get<std::map<std::string, std::vector<std::vector<std::size_t>>>>();
    for (const auto& e : j.at("examples")) {
      WorldExample ex;
      ex.example_id = e.at("id").get<std::string>();
      ex.family = e.at("family").get<std::string>();
      const auto& c = e.at("clip");
      if (c.is_string()) {
        auto it = clip_index.find(c.get<std::string>());
        if (it == clip_index.end()) fail(ErrorCode::InvalidArgument, "unknown clip '" + c.get<std::string>() + "'");
        ex.clip = it->second;
      } else {
        ex.clip = c.get<std::size_t>();
      }
      w.examples.push_back(std::move(ex));
    }
    for (const auto& m : j.at("methods")) {
      SimMethod method;
      method.name = m.at("name").get<std::string>();
      method.selector.kind = selector_kind_from_string(m.value("selector", method.name));
      method.selector.seed = m.value("seed", std::uint64_t{0});
      if (m.contains("target")) method.selector.target = m.at("target").get<std::vector<std::size_t>>();
      if (m.contains("scores")) {
        method.selector.scores = m.at("scores").get<std::map<std::string, std::vector<double>>>();
      }
      spec.methods.push_back(std::move(method));
    }
    if (j.contains("budgets")) o.grid = BudgetGrid(j.at("budgets").get<std::vector<double>>());
    if (j.contains("seeds")) o.seeds = j.at("seeds").get<std::vector<std::int64_t>>();
    if (j.contains("epsilons")) o.epsilons = j.at("epsilons").get<std::vector<double>>();
    o.reference_method = j.value("reference_method", o.reference_method);
    o.backbone = j.value("backbone", o.backbone);
    o.permutations = j.value("permutations", o.permutations);
    const auto mode = j.value("permutation_mode", std::string("global"));
    if (mode == "within_family") {
      o.permutation_mode = PermutationMode::within_family;
    } else if (mode != "global") {
      fail(ErrorCode::ConfigError, "permutation_mode must be 'global' or 'within_family'");
    }
    o.naive_runs = j.value("naive_runs", o.naive_runs);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad world file: ") + e.what());
  }
  w.validate();
  return spec;
}

WorldSpec load_world_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_world_spec(text);
}

void write_oracle_csv(std::ostream& out, std::span<const OracleFrontier> oracle) {
  out << "method,seed,scope,epsilon,budget\n";
  for (const auto& o : oracle) {
    out << o.method << "," << o.seed << "," << o.scope << "," << format_double(o.epsilon) << ","
        << (std::isinf(o.budget) ? std::string("INFEASIBLE") : format_double(o.budget)) << "\n";
  }
}

}  // namespace apsign::sim
