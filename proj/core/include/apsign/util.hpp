#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace apsign {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Fixed-precision text, used for human-facing tables.
std::string format_fixed(double value, int digits);

std::optional<double> parse_double(std::string_view text);

/// 64-bit FNV-1a; stable across platforms, used for provenance hashes and sub-seeds.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

inline double to_points(double fraction) { return 100.0 * fraction; }

}  // namespace apsign
