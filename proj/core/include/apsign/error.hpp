#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apsign {

enum class ErrorCode {
  // records
  MalformedRow,
  DuplicateKey,
  LossOutOfRange,
  UnpairedExample,
  EmptyPairing,
  UnassignedExample,
  MergeCycle,
  // estimators / resampling / frontiers
  EmptyDataset,
  EmptyFamily,
  KeyMismatch,
  StatisticFailure,
  UniverseMismatch,
  TooFewSeeds,
  GridMismatch,
  UnknownFamily,
  NoPermutations,
  // theory
  NotNormalized,
  DegenerateFactor,
  SolverDiverged,
  InstanceTooLarge,
  InfeasibleTolerance,
  // simulator
  MissingQuery,
  // plumbing
  InvalidArgument,
  ConfigError,
  IoFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Validation errors are caused by bad inputs (exit code 2 in the CLI);
/// everything else is a computation failure (exit code 3).
bool is_validation_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace apsign
