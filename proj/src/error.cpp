#include "s2sr/error.hpp"

namespace s2sr {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::MissingBand: return "MissingBand";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::PatchTooLarge: return "PatchTooLarge";
    case ErrorCode::TooFewPatches: return "TooFewPatches";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateTruth: return "DegenerateTruth";
    case ErrorCode::BandMismatch: return "BandMismatch";
    case ErrorCode::AllWindowsDegenerate: return "AllWindowsDegenerate";
    case ErrorCode::WeightsConfigMismatch: return "WeightsConfigMismatch";
    case ErrorCode::TileTooSmall: return "TileTooSmall";
  }
  return "UnknownError";
}

}  // namespace s2sr
