#include "priceband/error.hpp"

namespace priceband {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::IncompleteWindow: return "IncompleteWindow";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::CalibrationDegenerate: return "CalibrationDegenerate";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidDims: return "InvalidDims";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::PhaseOrderViolation: return "PhaseOrderViolation";
    case ErrorCode::InvalidSigma: return "InvalidSigma";
    case ErrorCode::UntrainedModel: return "UntrainedModel";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::TooFewScenarios: return "TooFewScenarios";
    case ErrorCode::ConditionMismatch: return "ConditionMismatch";
    case ErrorCode::EmptyRuns: return "EmptyRuns";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::MissingActuals: return "MissingActuals";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace priceband
