#pragma once

// Small builders for record sets and paired datasets used across the tests.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "apsign/records.hpp"
#include "oracles.hpp"

namespace fx {

inline apsign::EvalRecord raw_row(const std::string& id, double loss, const std::string& family = "all") {
  apsign::EvalRecord r;
  r.example_id = id;
  r.dataset = "d";
  r.method = "raw";
  r.backbone = "m";
  r.budget = apsign::Budget::raw();
  r.loss = loss;
  r.family_labels["kw"] = family;
  return r;
}

inline apsign::EvalRecord comp_row(const std::string& id, const std::string& method, double b, double loss,
                                   const std::string& family = "all", std::optional<std::int64_t> seed = 42) {
  apsign::EvalRecord r = raw_row(id, loss, family);
  r.method = method;
  r.budget = apsign::Budget::fraction(b);
  r.seed = seed;
  return r;
}

/// A paired dataset built directly from (family, raw, compressed) rows under partition "kw".
inline apsign::PairedDataset dataset(const std::vector<oracle::Row>& rows, double budget = 0.2,
                                     std::size_t n_min = 1) {
  std::vector<apsign::EvalRecord> recs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "e%06zu", i);
    recs.push_back(raw_row(id, rows[i].raw, rows[i].family));
    recs.push_back(comp_row(id, "m", budget, rows[i].comp, rows[i].family));
  }
  apsign::PairingRequest req;
  req.method = "m";
  req.budget = budget;
  auto ds = apsign::pair_with_reference(recs, req);
  auto spec = apsign::partition_from_labels(recs, "kw", n_min);
  return apsign::apply_partition(std::move(ds), spec);
}

/// Rows whose family `f` has `n` pairs and integer excess total `damaged`
/// (raw 0 / compressed 1 for the damaged pairs, both 0 or both 1 otherwise).
inline void add_family(std::vector<oracle::Row>& rows, const std::string& f, int n, int damaged) {
  for (int i = 0; i < n; ++i) {
    const bool hit = i < damaged;
    const double base = (i % 5 == 4) ? 1.0 : 0.0;
    rows.push_back({f, hit ? 0.0 : base, hit ? 1.0 : base});
  }
}

}  // namespace fx
