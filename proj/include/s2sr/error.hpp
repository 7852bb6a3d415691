#pragma once

#include <stdexcept>
#include <string>

namespace s2sr {

enum class ErrorCode {
  InvariantViolation,
  MissingBand,
  DimensionMismatch,
  CorruptHeader,
  VersionUnsupported,
  IoFailure,
  ShapeMismatch,
  DomainError,
  MissingInput,
  StaleCache,
  PatchTooLarge,
  TooFewPatches,
  NonFiniteLoss,
  DegenerateTruth,
  BandMismatch,
  AllWindowsDegenerate,
  WeightsConfigMismatch,
  TileTooSmall,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace s2sr
