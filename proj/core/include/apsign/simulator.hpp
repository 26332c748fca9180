#pragma once

// Chunk-retention compressors and a planted-world mock answerer whose budget
// frontiers are known by construction.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "apsign/records.hpp"

namespace apsign::sim {

inline constexpr std::size_t kMaxChunks = 120;

/// One clip split into chunks; a chunk is a frame of samples (a scalar score
/// is a one-sample frame).
struct ChunkedClip {
  std::string clip_id;
  std::vector<std::vector<double>> chunks;

  std::size_t size() const noexcept { return chunks.size(); }
  static ChunkedClip from_scores(std::string id, std::span<const double> scores);
};

/// Truncates to kMaxChunks and pads an empty clip with one silent chunk.
ChunkedClip normalize_clip(ChunkedClip clip);

/// Root-mean-square of a frame; 0 for an empty frame.
double rms(std::span<const double> frame);

enum class SelectorKind { uniform, random, energy, planted_oracle, conditioned_toy };

std::string_view to_string(SelectorKind k) noexcept;
SelectorKind selector_kind_from_string(std::string_view text);

struct Selector {
  SelectorKind kind = SelectorKind::uniform;
  std::uint64_t seed = 0;                              // random
  std::vector<std::size_t> target;                     // planted_oracle
  std::map<std::string, std::vector<double>> scores;  // conditioned_toy: query -> per-chunk score

  bool uses_query() const noexcept {
    return kind == SelectorKind::planted_oracle || kind == SelectorKind::conditioned_toy;
  }
};

/// k = max(1, floor(b N)), and k = N at b = 1.
std::size_t retained_count(double b, std::size_t n);

/// Ascending chunk indices kept at budget b.
std::vector<std::size_t> select_chunks(const ChunkedClip& clip, const Selector& sel, double b,
                                       const std::optional<std::string>& query = std::nullopt);

double topk_jaccard(std::span<const std::size_t> a, std::span<const std::size_t> b);

enum class PermutationMode { global, within_family };

/// Bijection on example ids (example -> example whose query the selector sees).
/// Never the identity on a group with more than one member.
std::map<std::string, std::string> permute_query_stream(const std::map<std::string, std::string>& assignment,
                                                        PermutationMode mode, std::uint64_t perm_seed);

struct WorldExample {
  std::string example_id;
  std::size_t clip = 0;  // index into PlantedWorld::clips
  std::string family;    // query family asked of this example
};

struct PlantedWorld {
  std::vector<ChunkedClip> clips;
  // family -> per clip required chunk set S_f
  std::map<std::string, std::vector<std::vector<std::size_t>>> required;
  std::vector<WorldExample> examples;
  std::string dataset = "planted";
  std::string partition = "family";

  void validate() const;
  std::map<std::string, std::string> assignment() const;  // example -> family
};

struct SimMethod {
  std::string name;
  Selector selector;
};

struct GenerateOptions {
  BudgetGrid grid = BudgetGrid::main_grid();
  std::vector<std::int64_t> seeds = {42};
  std::vector<double> epsilons = {0.01, 0.02, 0.05};
  std::string reference_method = "raw";
  std::string backbone = "mock";
  std::size_t permutations = 0;  // permuted streams per seed, at most 10
  PermutationMode permutation_mode = PermutationMode::global;
  bool naive_runs = false;  // also emit "<method>.naive" runs where the answerer sees the permuted query
};

inline constexpr std::string_view kAvgScope = "*avg";
inline constexpr std::string_view kFamScope = "*fam";

/// Frontier from direct loops over the world: scope is a family name, kAvgScope or kFamScope.
struct OracleFrontier {
  std::string method;
  std::int64_t seed = 0;
  std::string scope;
  double epsilon = 0.0;
  double budget = 0.0;  // +inf when infeasible
};

struct Simulation {
  std::vector<EvalRecord> records;
  std::vector<OracleFrontier> oracle;  // anchor stream only
};

/// Mock answerer: raw loss 0; compressed loss 0 iff S_f is inside the kept chunks.
Simulation planted_world_generate(const PlantedWorld& world, std::span<const SimMethod> methods,
                                  const GenerateOptions& options);

std::string naive_method_name(std::string_view method);

/// A world file: the world, the methods to run and the generation options.
struct WorldSpec {
  PlantedWorld world;
  std::vector<SimMethod> methods;
  GenerateOptions options;
};

WorldSpec parse_world_spec(std::string_view json_text);
WorldSpec load_world_spec(const std::filesystem::path& path);

/// method,seed,scope,epsilon,budget
void write_oracle_csv(std::ostream& out, std::span<const OracleFrontier> oracle);

}  // namespace apsign::sim
