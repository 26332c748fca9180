#include "apsign/error.hpp"

namespace apsign {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::LossOutOfRange: return "LossOutOfRange";
    case ErrorCode::UnpairedExample: return "UnpairedExample";
    case ErrorCode::EmptyPairing: return "EmptyPairing";
    case ErrorCode::UnassignedExample: return "UnassignedExample";
    case ErrorCode::MergeCycle: return "MergeCycle";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyFamily: return "EmptyFamily";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::StatisticFailure: return "StatisticFailure";
    case ErrorCode::UniverseMismatch: return "UniverseMismatch";
    case ErrorCode::TooFewSeeds: return "TooFewSeeds";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::UnknownFamily: return "UnknownFamily";
    case ErrorCode::NoPermutations: return "NoPermutations";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::DegenerateFactor: return "DegenerateFactor";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::InfeasibleTolerance: return "InfeasibleTolerance";
    case ErrorCode::MissingQuery: return "MissingQuery";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::StatisticFailure:
    case ErrorCode::SolverDiverged:
    case ErrorCode::IoFailure:
      return false;
    default:
      return true;
  }
}

}  // namespace apsign
