#pragma once

// Evaluation data model: answer-loss records, paired raw/compressed datasets,
// budget grids and query-family partitions.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apsign {

/// Absolute tolerance used whenever two budget fractions are compared.
inline constexpr double kBudgetTolerance = 1e-9;

/// Either the RAW (uncompressed) marker or a retained fraction in (0, 1].
class Budget {
 public:
  Budget() = default;

  static Budget raw() { return Budget{}; }
  static Budget fraction(double b);

  bool is_raw() const noexcept { return value_ == 0.0; }
  /// Throws InvalidArgument on RAW.
  double value() const;
  bool matches(double b) const noexcept;
  std::string to_string() const;

  friend bool operator==(const Budget& a, const Budget& b) noexcept;

 private:
  explicit Budget(double v) : value_(v) {}
  double value_ = 0.0;
};

struct QueryStream {
  std::optional<int> perm_id;  // nullopt = anchor

  static QueryStream anchor() { return {}; }
  static QueryStream permuted(int id) { return QueryStream{id}; }
  /// Accepts "anchor" or "perm:<k>".
  static QueryStream parse(std::string_view text);

  bool is_anchor() const noexcept { return !perm_id.has_value(); }
  std::string to_string() const;

  auto operator<=>(const QueryStream&) const = default;
};

struct EvalRecord {
  std::string example_id;
  std::string dataset;
  std::string method;
  std::string backbone;
  std::optional<std::int64_t> seed;
  Budget budget;
  QueryStream query_stream;
  double loss = 0.0;
  std::map<std::string, std::string> family_labels;  // partition -> family
  // Audio-source grouping id; carried through but not used for resampling yet.
  std::optional<std::string> source_id;
  // Pass-through token count for token-axis tables.
  std::optional<double> num_audio_tokens;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

enum class RecordFormat { jsonl, csv };

enum class LossKind { bounded, zero_one };

struct LossSpec {
  LossKind kind = LossKind::bounded;
  double bound = 1.0;  // L_max
};

RecordFormat format_from_path(const std::filesystem::path& path);

/// Parses records, preserving row order. Rejects malformed rows, duplicate
/// (example_id, method, budget, seed, query_stream) keys and out-of-range losses.
std::vector<EvalRecord> parse_records(std::istream& in, RecordFormat format,
                                      const LossSpec& loss = {});
std::vector<EvalRecord> load_records(const std::filesystem::path& path,
                                     const LossSpec& loss = {});

void write_records(std::ostream& out, std::span<const EvalRecord> records, RecordFormat format);

/// Strictly increasing retained fractions in (0, 1].
class BudgetGrid {
 public:
  BudgetGrid() = default;
  explicit BudgetGrid(std::vector<double> budgets);

  static BudgetGrid main_grid();      // {0.05, 0.10, 0.20, 0.40, 1.00}
  static BudgetGrid expanded_grid();  // nine-point appendix grid

  const std::vector<double>& budgets() const noexcept { return budgets_; }
  std::size_t size() const noexcept { return budgets_.size(); }
  bool empty() const noexcept { return budgets_.empty(); }
  double operator[](std::size_t i) const { return budgets_[i]; }
  std::optional<std::size_t> index_of(double b) const noexcept;

  friend bool operator==(const BudgetGrid& a, const BudgetGrid& b) noexcept;

 private:
  std::vector<double> budgets_;
};

enum class SparsePolicy { merge_to_parent, mark_inconclusive };

struct PartitionSpec {
  std::string name;
  std::map<std::string, std::string> assignment;  // example_id -> family
  std::map<std::string, std::string> parent;      // family -> parent family
  std::size_t n_min = 50;
  SparsePolicy sparse_policy = SparsePolicy::merge_to_parent;
};

/// Builds a partition from the `families` labels carried by records.
PartitionSpec partition_from_labels(std::span<const EvalRecord> records, const std::string& name,
                                    std::size_t n_min = 50,
                                    SparsePolicy policy = SparsePolicy::merge_to_parent,
                                    std::map<std::string, std::string> parent = {});

/// JSON partition file: {"name", "assignment": {...}, "parent": {...}, "n_min", "policy"}.
PartitionSpec parse_partition(std::string_view json_text);
PartitionSpec load_partition(const std::filesystem::path& path);
std::string partition_to_json(const PartitionSpec& spec);

struct Pair {
  std::string example_id;
  double loss_raw = 0.0;
  double loss_compressed = 0.0;
  std::map<std::string, std::string> families;  // partition -> (resolved) family
  std::optional<std::string> source_id;
  std::optional<double> num_audio_tokens;

  double excess() const noexcept { return loss_compressed - loss_raw; }
};

struct Provenance {
  std::string dataset;
  std::string method;
  std::string backbone;
  std::optional<std::int64_t> seed;
  QueryStream query_stream;
};

/// Outcome of sparse-cell handling for one partition.
struct ResolvedPartition {
  std::string name;
  std::map<std::string, std::string> merged_into;  // original family -> final family
  std::set<std::string> inconclusive;
  std::set<std::string> declared;  // original family names from the assignment
};

struct PairedDataset {
  double budget = 1.0;
  std::vector<Pair> pairs;  // sorted by example_id
  Provenance provenance;
  double loss_bound = 1.0;
  std::vector<std::string> dropped;  // unpaired ids excluded under the drop policy
  std::map<std::string, ResolvedPartition> partitions;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  const ResolvedPartition* partition(std::string_view name) const;
};

enum class UnpairedPolicy { error, drop };

struct PairingRequest {
  std::string reference_method = "raw";
  std::string method;
  double budget = 1.0;
  std::optional<std::int64_t> seed;
  QueryStream query_stream;
  std::optional<std::string> dataset;
  std::optional<std::string> backbone;
  // Backbone of the raw reference; defaults to `backbone` (same-backbone convention).
  std::optional<std::string> reference_backbone;
  UnpairedPolicy unpaired = UnpairedPolicy::error;
  double loss_bound = 1.0;
};

PairedDataset pair_with_reference(std::span<const EvalRecord> records, const PairingRequest& request);

/// Relabels each pair with its family under `spec`, merging or flagging
/// families with fewer than n_min pairs.
PairedDataset apply_partition(PairedDataset ds, const PartitionSpec& spec);

}  // namespace apsign
