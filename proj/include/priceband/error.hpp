#pragma once

#include <stdexcept>
#include <string>

namespace priceband {

enum class ErrorCode {
  MalformedRow,
  NonMonotonicTimestamps,
  EmptyDataset,
  DegenerateRange,
  EmptyInput,
  MissingChannel,
  IncompleteWindow,
  InsufficientData,
  CalibrationDegenerate,
  ZeroVariance,
  LengthMismatch,
  InvalidDims,
  ShapeMismatch,
  StaleCache,
  NonFiniteValue,
  NonFiniteLoss,
  InvalidArgument,
  DimensionMismatch,
  DivergedLoss,
  PhaseOrderViolation,
  InvalidSigma,
  UntrainedModel,
  VersionMismatch,
  CorruptCheckpoint,
  EmptySet,
  TooFewScenarios,
  ConditionMismatch,
  EmptyRuns,
  MissingArtifact,
  MissingActuals,
  Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace priceband
