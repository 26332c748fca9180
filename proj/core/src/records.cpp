#include "apsign/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "apsign/error.hpp"
#include "apsign/util.hpp"

namespace apsign {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Budget / QueryStream / BudgetGrid

Budget Budget::fraction(double b) {
  if (!std::isfinite(b) || b <= 0.0 || b > 1.0 + kBudgetTolerance) {
    fail(ErrorCode::InvalidArgument, "budget fraction must lie in (0,1], got " + format_double(b));
  }
  return Budget(std::min(b, 1.0));
}

double Budget::value() const {
  if (is_raw()) fail(ErrorCode::InvalidArgument, "RAW budget has no fraction");
  return value_;
}

bool Budget::matches(double b) const noexcept {
  return !is_raw() && std::abs(value_ - b) <= kBudgetTolerance;
}

std::string Budget::to_string() const { return is_raw() ? "RAW" : format_double(value_); }

bool operator==(const Budget& a, const Budget& b) noexcept {
  if (a.is_raw() || b.is_raw()) return a.is_raw() == b.is_raw();
  return std::abs(a.value_ - b.value_) <= kBudgetTolerance;
}

QueryStream QueryStream::parse(std::string_view text) {
  if (text.empty() || text == "anchor") return anchor();
  constexpr std::string_view prefix = "perm:";
  if (text.substr(0, prefix.size()) == prefix) {
    auto rest = text.substr(prefix.size());
    auto v = parse_double(rest);
    if (v && *v >= 0 && std::floor(*v) == *v && *v < 1e9) return permuted(static_cast<int>(*v));
  }
  fail(ErrorCode::InvalidArgument, "query_stream must be 'anchor' or 'perm:<k>', got '" +
                                       std::string(text) + "'");
}

std::string QueryStream::to_string() const {
  return perm_id ? "perm:" + std::to_string(*perm_id) : std::string("anchor");
}

BudgetGrid::BudgetGrid(std::vector<double> budgets) : budgets_(std::move(budgets)) {
  for (std::size_t i = 0; i < budgets_.size(); ++i) {
    double b = budgets_[i];
    if (!std::isfinite(b) || b <= 0.0 || b > 1.0) {
      fail(ErrorCode::InvalidArgument, "grid budget outside (0,1]: " + format_double(b));
    }
    if (i > 0 && b <= budgets_[i - 1] + kBudgetTolerance) {
      fail(ErrorCode::InvalidArgument, "budget grid must be strictly increasing");
    }
  }
}

BudgetGrid BudgetGrid::main_grid() { return BudgetGrid({0.05, 0.10, 0.20, 0.40, 1.00}); }

BudgetGrid BudgetGrid::expanded_grid() {
  return BudgetGrid({0.01, 0.025, 0.05, 0.10, 0.20, 0.40, 0.60, 0.80, 1.00});
}

std::optional<std::size_t> BudgetGrid::index_of(double b) const noexcept {
  for (std::size_t i = 0; i < budgets_.size(); ++i) {
    if (std::abs(budgets_[i] - b) <= kBudgetTolerance) return i;
  }
  return std::nullopt;
}

bool operator==(const BudgetGrid& a, const BudgetGrid& b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - b[i]) > kBudgetTolerance) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct RecordKey {
  std::string example_id;
  std::string dataset;
  std::string method;
  std::string backbone;
  long long budget;
  std::optional<std::int64_t> seed;
  QueryStream stream;

  auto operator<=>(const RecordKey&) const = default;
};

long long budget_key(const Budget& b) {
  return b.is_raw() ? -1 : std::llround(b.value() / kBudgetTolerance);
}

std::string describe(const RecordKey& k) {
  std::string s = k.example_id + "/" + k.method + "/";
  s += k.budget < 0 ? "RAW" : format_double(static_cast<double>(k.budget) * kBudgetTolerance);
  s += "/seed=" + (k.seed ? std::to_string(*k.seed) : std::string("none"));
  s += "/" + k.stream.to_string();
  return s;
}

[[noreturn]] void malformed(std::size_t line, const std::string& reason) {
  fail(ErrorCode::MalformedRow, "line " + std::to_string(line) + ": " + reason);
}

void validate_loss(double loss, const LossSpec& spec, std::size_t line) {
  if (!std::isfinite(loss) || loss < 0.0) {
    fail(ErrorCode::LossOutOfRange,
         "line " + std::to_string(line) + ": loss must be non-negative, got " + format_double(loss));
  }
  if (spec.kind == LossKind::zero_one && loss != 0.0 && loss != 1.0) {
    fail(ErrorCode::LossOutOfRange,
         "line " + std::to_string(line) + ": 0-1 loss must be 0 or 1, got " + format_double(loss));
  }
  if (loss > spec.bound) {
    fail(ErrorCode::LossOutOfRange, "line " + std::to_string(line) + ": loss " +
                                        format_double(loss) + " exceeds bound " +
                                        format_double(spec.bound));
  }
}

Budget budget_from_text(std::string_view text, std::size_t line) {
  if (text == "RAW" || text == "raw") return Budget::raw();
  auto v = parse_double(text);
  if (!v) malformed(line, "budget must be \"RAW\" or a number");
  try {
    return Budget::fraction(*v);
  } catch (const Error& e) {
    malformed(line, e.what());
  }
}

std::string json_string_field(const json& row, const char* name, std::size_t line, bool required) {
  auto it = row.find(name);
  if (it == row.end() || it->is_null()) {
    if (required) malformed(line, std::string("missing field '") + name + "'");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  malformed(line, std::string("field '") + name + "' must be a string");
}

EvalRecord record_from_json(const json& row, std::size_t line, const LossSpec& loss_spec) {
  if (!row.is_object()) malformed(line, "row is not a JSON object");
  EvalRecord r;
  r.example_id = json_string_field(row, "example_id", line, true);
  if (r.example_id.empty()) malformed(line, "empty example_id");
  r.dataset = json_string_field(row, "dataset", line, false);
  r.method = json_string_field(row, "method", line, true);
  r.backbone = json_string_field(row, "backbone", line, false);

  if (auto it = row.find("seed"); it != row.end() && !it->is_null()) {
    if (!it->is_number_integer()) malformed(line, "seed must be an integer");
    r.seed = it->get<std::int64_t>();
  }

  auto b = row.find("budget");
  if (b == row.end() || b->is_null()) malformed(line, "missing field 'budget'");
  if (b->is_string()) {
    r.budget = budget_from_text(b->get<std::string>(), line);
  } else if (b->is_number()) {
    try {
      r.budget = Budget::fraction(b->get<double>());
    } catch (const Error& e) {
      malformed(line, e.what());
    }
  } else {
    malformed(line, "budget must be \"RAW\" or a number");
  }

  if (auto it = row.find("query_stream"); it != row.end() && !it->is_null()) {
    if (!it->is_string()) malformed(line, "query_stream must be a string");
    try {
      r.query_stream = QueryStream::parse(it->get<std::string>());
    } catch (const Error& e) {
      malformed(line, e.what());
    }
  }

  auto l = row.find("loss");
  if (l == row.end() || !l->is_number()) malformed(line, "missing numeric field 'loss'");
  r.loss = l->get<double>();
  validate_loss(r.loss, loss_spec, line);

  if (auto it = row.find("families"); it != row.end() && !it->is_null()) {
    if (!it->is_object()) malformed(line, "families must be an object");
    for (auto& [k, v] : it->items()) {
      if (!v.is_string()) malformed(line, "family label for '" + k + "' must be a string");
      r.family_labels[k] = v.get<std::string>();
    }
  }
  if (auto it = row.find("source_id"); it != row.end() && !it->is_null()) {
    r.source_id = json_string_field(row, "source_id", line, false);
  }
  if (auto it = row.find("num_audio_tokens"); it != row.end() && !it->is_null()) {
    if (!it->is_number()) malformed(line, "num_audio_tokens must be numeric");
    r.num_audio_tokens = it->get<double>();
  }
  return r;
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) malformed(line_no, "unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

constexpr std::string_view kFamilyPrefix = "family.";

EvalRecord record_from_csv(const std::vector<std::string>& header,
                           const std::vector<std::string>& cells, std::size_t line,
                           const LossSpec& loss_spec) {
  if (cells.size() != header.size()) {
    malformed(line, "expected " + std::to_string(header.size()) + " columns, got " +
                        std::to_string(cells.size()));
  }
  EvalRecord r;
  bool have_budget = false;
  bool have_loss = false;
  bool have_method = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& col = header[i];
    const std::string& v = cells[i];
    if (col == "example_id") {
      r.example_id = v;
    } else if (col == "dataset") {
      r.dataset = v;
    } else if (col == "method") {
      r.method = v;
      have_method = true;
    } else if (col == "backbone") {
      r.backbone = v;
    } else if (col == "seed") {
      if (!v.empty()) {
        auto s = parse_double(v);
        if (!s || std::floor(*s) != *s) malformed(line, "seed must be an integer");
        r.seed = static_cast<std::int64_t>(*s);
      }
    } else if (col == "budget") {
      r.budget = budget_from_text(v, line);
      have_budget = true;
    } else if (col == "query_stream") {
      try {
        r.query_stream = QueryStream::parse(v);
      } catch (const Error& e) {
        malformed(line, e.what());
      }
    } else if (col == "loss") {
      auto x = parse_double(v);
      if (!x) malformed(line, "loss is not a number");
      r.loss = *x;
      have_loss = true;
    } else if (col == "source_id") {
      if (!v.empty()) r.source_id = v;
    } else if (col == "num_audio_tokens") {
      if (!v.empty()) {
        auto x = parse_double(v);
        if (!x) malformed(line, "num_audio_tokens is not a number");
        r.num_audio_tokens = *x;
      }
    } else if (col.substr(0, kFamilyPrefix.size()) == kFamilyPrefix) {
      if (!v.empty()) r.family_labels[col.substr(kFamilyPrefix.size())] = v;
    }
  }
  if (r.example_id.empty()) malformed(line, "missing example_id");
  if (!have_method || r.method.empty()) malformed(line, "missing method");
  if (!have_budget) malformed(line, "missing budget");
  if (!have_loss) malformed(line, "missing loss");
  validate_loss(r.loss, loss_spec, line);
  return r;
}

}  // namespace

RecordFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return RecordFormat::csv;
  return RecordFormat::jsonl;
}

std::vector<EvalRecord> parse_records(std::istream& in, RecordFormat format, const LossSpec& loss) {
  std::vector<EvalRecord> out;
  std::set<RecordKey> seen;
  auto admit = [&](EvalRecord r, std::size_t line) {
    RecordKey key{r.example_id, r.dataset, r.method,          r.backbone,
                  budget_key(r.budget), r.seed, r.query_stream};
    if (!seen.insert(key).second) {
      fail(ErrorCode::DuplicateKey, "line " + std::to_string(line) + ": " + describe(key));
    }
    out.push_back(std::move(r));
  };

  std::string line;
  std::size_t line_no = 0;
  if (format == RecordFormat::jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json row;
      try {
        row = json::parse(line);
      } catch (const json::parse_error& e) {
        malformed(line_no, std::string("invalid JSON: ") + e.what());
      }
      admit(record_from_json(row, line_no, loss), line_no);
    }
    return out;
  }

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line, line_no);
    if (header.empty()) {
      header = std::move(cells);
      continue;
    }
    admit(record_from_csv(header, cells, line_no, loss), line_no);
  }
  return out;
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path, const LossSpec& loss) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open records file " + path.string());
  try {
    return parse_records(in, format_from_path(path), loss);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + std::string(e.what()));
  }
}

void write_records(std::ostream& out, std::span<const EvalRecord> records, RecordFormat format) {
  if (format == RecordFormat::jsonl) {
    for (const auto& r : records) {
      json row;
      row["example_id"] = r.example_id;
      row["dataset"] = r.dataset;
      row["method"] = r.method;
      row["backbone"] = r.backbone;
      row["seed"] = r.seed ? json(*r.seed) : json(nullptr);
      row["budget"] = r.budget.is_raw() ? json("RAW") : json(r.budget.value());
      row["query_stream"] = r.query_stream.to_string();
      row["loss"] = r.loss;
      row["families"] = r.family_labels;
      if (r.source_id) row["source_id"] = *r.source_id;
      if (r.num_audio_tokens) row["num_audio_tokens"] = *r.num_audio_tokens;
      out << row.dump() << '\n';
    }
    return;
  }

  std::set<std::string> partitions;
  bool any_source = false;
  bool any_tokens = false;
  for (const auto& r : records) {
    for (const auto& [p, f] : r.family_labels) partitions.insert(p);
    any_source = any_source || r.source_id.has_value();
    any_tokens = any_tokens || r.num_audio_tokens.has_value();
  }
  out << "example_id,dataset,method,backbone,seed,budget,query_stream,loss";
  if (any_source) out << ",source_id";
  if (any_tokens) out << ",num_audio_tokens";
  for (const auto& p : partitions) out << ',' << csv_escape(std::string(kFamilyPrefix) + p);
  out << '\n';
  for (const auto& r : records) {
    out << csv_escape(r.example_id) << ',' << csv_escape(r.dataset) << ',' << csv_escape(r.method)
        << ',' << csv_escape(r.backbone) << ',' << (r.seed ? std::to_string(*r.seed) : "") << ','
        << r.budget.to_string() << ',' << r.query_stream.to_string() << ','
        << format_double(r.loss);
    if (any_source) out << ',' << csv_escape(r.source_id.value_or(""));
    if (any_tokens) out << ',' << (r.num_audio_tokens ? format_double(*r.num_audio_tokens) : "");
    for (const auto& p : partitions) {
      auto it = r.family_labels.find(p);
      out << ',' << (it == r.family_labels.end() ? "" : csv_escape(it->second));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Partitions

PartitionSpec partition_from_labels(std::span<const EvalRecord> records, const std::string& name,
                                    std::size_t n_min, SparsePolicy policy,
                                    std::map<std::string, std::string> parent) {
  PartitionSpec spec;
  spec.name = name;
  spec.n_min = n_min;
  spec.sparse_policy = policy;
  spec.parent = std::move(parent);
  for (const auto& r : records) {
    auto it = r.family_labels.find(name);
    if (it == r.family_labels.end()) continue;
    auto [pos, inserted] = spec.assignment.emplace(r.example_id, it->second);
    if (!inserted && pos->second != it->second) {
      fail(ErrorCode::MalformedRow, "example '" + r.example_id + "' carries conflicting labels '" +
                                        pos->second + "' and '" + it->second +
                                        "' for partition '" + name + "'");
    }
  }
  return spec;
}

namespace {

SparsePolicy policy_from_text(const std::string& text) {
  if (text == "merge_to_parent" || text == "merge") return SparsePolicy::merge_to_parent;
  if (text == "mark_inconclusive" || text == "inconclusive") return SparsePolicy::mark_inconclusive;
  fail(ErrorCode::ConfigError, "unknown sparse policy '" + text + "'");
}

}  // namespace

PartitionSpec parse_partition(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ConfigError, std::string("partition file is not valid JSON: ") + e.what());
  }
  PartitionSpec spec;
  try {
    spec.name = j.value("name", std::string{});
    const json& assign = j.contains("assignment") ? j.at("assignment") : j;
    if (!j.contains("assignment") && j.contains("name")) {
      fail(ErrorCode::ConfigError, "partition file needs an 'assignment' map");
    }
    for (auto& [k, v] : assign.items()) spec.assignment[k] = v.get<std::string>();
    if (j.contains("parent")) {
      for (auto& [k, v] : j.at("parent").items()) spec.parent[k] = v.get<std::string>();
    }
    if (j.contains("n_min")) {
      auto n = j.at("n_min").get<long long>();
      if (n < 1) fail(ErrorCode::ConfigError, "n_min must be positive");
      spec.n_min = static_cast<std::size_t>(n);
    }
    if (j.contains("policy")) spec.sparse_policy = policy_from_text(j.at("policy").get<std::string>());
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad partition file: ") + e.what());
  }
  return spec;
}

PartitionSpec load_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open partition file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto spec = parse_partition(ss.str());
  if (spec.name.empty()) spec.name = path.stem().string();
  return spec;
}

std::string partition_to_json(const PartitionSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["assignment"] = spec.assignment;
  j["parent"] = spec.parent;
  j["n_min"] = spec.n_min;
  j["policy"] = spec.sparse_policy == SparsePolicy::merge_to_parent ? "merge_to_parent"
                                                                     : "mark_inconclusive";
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Pairing

const ResolvedPartition* PairedDataset::partition(std::string_view name) const {
  auto it = partitions.find(std::string(name));
  return it == partitions.end() ? nullptr : &it->second;
}

PairedDataset pair_with_reference(std::span<const EvalRecord> records, const PairingRequest& req) {
  if (req.method.empty()) fail(ErrorCode::InvalidArgument, "pairing needs a method under test");
  const double budget = Budget::fraction(req.budget).value();
  const auto& ref_backbone = req.reference_backbone ? req.reference_backbone : req.backbone;

  std::map<std::string, std::vector<const EvalRecord*>> raw;
  std::map<std::string, const EvalRecord*> compressed;
  for (const auto& r : records) {
    if (req.dataset && r.dataset != *req.dataset) continue;
    if (r.budget.is_raw()) {
      if (r.method != req.reference_method || !r.query_stream.is_anchor()) continue;
      if (ref_backbone && r.backbone != *ref_backbone) continue;
      raw[r.example_id].push_back(&r);
      continue;
    }
    if (r.method != req.method || !r.budget.matches(budget)) continue;
    if (r.query_stream != req.query_stream) continue;
    if (req.backbone && r.backbone != *req.backbone) continue;
    if (req.seed && r.seed != req.seed) continue;
    auto [it, inserted] = compressed.emplace(r.example_id, &r);
    if (!inserted) {
      fail(ErrorCode::DuplicateKey,
           "example '" + r.example_id + "' has several compressed rows for method '" + req.method +
               "' at budget " + format_double(budget) + "; select a seed/backbone/dataset");
    }
  }

  auto pick_raw = [&](const std::string& id) -> const EvalRecord* {
    auto it = raw.find(id);
    if (it == raw.end()) return nullptr;
    const auto& cands = it->second;
    if (cands.size() == 1) return cands.front();
    const EvalRecord* match = nullptr;
    for (const auto* c : cands) {
      if (req.seed && c->seed == req.seed) {
        if (match) match = nullptr;
        else match = c;
      }
    }
    if (!match) {
      fail(ErrorCode::DuplicateKey, "example '" + id + "' has " + std::to_string(cands.size()) +
                                        " ambiguous RAW reference rows");
    }
    return match;
  };

  PairedDataset ds;
  ds.budget = budget;
  ds.loss_bound = req.loss_bound;
  ds.provenance = Provenance{req.dataset.value_or(""), req.method, req.backbone.value_or(""),
                             req.seed, req.query_stream};

  std::set<std::string> ids;
  for (const auto& [id, _] : raw) ids.insert(id);
  for (const auto& [id, _] : compressed) ids.insert(id);

  std::vector<std::string> unpaired;
  for (const auto& id : ids) {
    const EvalRecord* r = pick_raw(id);
    auto cit = compressed.find(id);
    if (!r || cit == compressed.end()) {
      unpaired.push_back(id);
      continue;
    }
    const EvalRecord* c = cit->second;
    if (r->loss > req.loss_bound || c->loss > req.loss_bound) {
      fail(ErrorCode::LossOutOfRange, "example '" + id + "' exceeds loss bound " +
                                          format_double(req.loss_bound));
    }
    Pair p;
    p.example_id = id;
    p.loss_raw = r->loss;
    p.loss_compressed = c->loss;
    p.families = c->family_labels;
    for (const auto& [k, v] : r->family_labels) p.families.emplace(k, v);
    p.source_id = c->source_id ? c->source_id : r->source_id;
    p.num_audio_tokens = c->num_audio_tokens;
    if (ds.provenance.dataset.empty()) ds.provenance.dataset = c->dataset;
    if (ds.provenance.backbone.empty()) ds.provenance.backbone = c->backbone;
    ds.pairs.push_back(std::move(p));
  }

  if (!unpaired.empty() && req.unpaired == UnpairedPolicy::error) {
    std::string list;
    for (std::size_t i = 0; i < unpaired.size() && i < 10; ++i) list += (i ? ", " : "") + unpaired[i];
    if (unpaired.size() > 10) list += ", ...";
    fail(ErrorCode::UnpairedExample,
         std::to_string(unpaired.size()) + " unpaired example(s) for method '" + req.method +
             "' at budget " + format_double(budget) + ": " + list);
  }
  ds.dropped = std::move(unpaired);
  if (ds.pairs.empty()) {
    fail(ErrorCode::EmptyPairing, "no raw/compressed pairs for method '" + req.method +
                                      "' at budget " + format_double(budget));
  }
  return ds;
}

PairedDataset apply_partition(PairedDataset ds, const PartitionSpec& spec) {
  if (spec.name.empty()) fail(ErrorCode::InvalidArgument, "partition needs a name");
  if (spec.n_min == 0) fail(ErrorCode::InvalidArgument, "n_min must be positive");

  ResolvedPartition resolved;
  resolved.name = spec.name;

  std::vector<std::string> label(ds.pairs.size());
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    auto it = spec.assignment.find(ds.pairs[i].example_id);
    if (it == spec.assignment.end()) {
      fail(ErrorCode::UnassignedExample, "example '" + ds.pairs[i].example_id +
                                             "' has no family in partition '" + spec.name + "'");
    }
    label[i] = it->second;
  }
  for (const auto& [id, fam] : spec.assignment) resolved.declared.insert(fam);

  auto counts = [&] {
    std::map<std::string, std::size_t> c;
    for (const auto& l : label) ++c[l];
    return c;
  };

  // Families whose parent chain loops are rejected as soon as a merge walks them.
  auto check_chain = [&](const std::string& start) {
    std::set<std::string> visited{start};
    std::string cur = start;
    for (auto it = spec.parent.find(cur); it != spec.parent.end(); it = spec.parent.find(cur)) {
      cur = it->second;
      if (!visited.insert(cur).second) {
        fail(ErrorCode::MergeCycle, "parent chain of family '" + start + "' loops at '" + cur + "'");
      }
    }
  };

  if (spec.sparse_policy == SparsePolicy::merge_to_parent) {
    for (;;) {
      auto c = counts();
      std::optional<std::string> victim;
      for (const auto& [fam, n] : c) {
        if (n >= spec.n_min) continue;
        auto pit = spec.parent.find(fam);
        if (pit == spec.parent.end() || pit->second == fam) continue;
        victim = fam;
        break;  // lexicographically smallest sparse family with a parent
      }
      if (!victim) break;
      check_chain(*victim);
      const std::string& target = spec.parent.at(*victim);
      for (auto& l : label) {
        if (l == *victim) l = target;
      }
      for (auto& [orig, fin] : resolved.merged_into) {
        if (fin == *victim) fin = target;
      }
      if (resolved.declared.count(*victim)) resolved.merged_into.emplace(*victim, target);
    }
  }
  for (const auto& [fam, n] : counts()) {
    if (n < spec.n_min) resolved.inconclusive.insert(fam);
  }
  for (auto it = resolved.merged_into.begin(); it != resolved.merged_into.end();) {
    if (it->first == it->second) it = resolved.merged_into.erase(it);
    else ++it;
  }

  for (std::size_t i = 0; i < ds.pairs.size(); ++i) ds.pairs[i].families[spec.name] = label[i];
  ds.partitions[spec.name] = std::move(resolved);
  return ds;
}

}  // namespace apsign
