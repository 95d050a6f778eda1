#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hamassim {

enum class ErrorCode {
  DimensionMismatch,
  NotPositiveDefinite,
  NonFiniteValue,
  UnsupportedPrimitive,
  ScalarRequired,
  SingularRadius,
  NonFiniteState,
  FixedPointDiverged,
  InvalidArgument,
  MalformedCheckpoint,
  NegativeScaledCov,
  CovarianceCollapse,
  GridMismatch,
  NonFiniteLoss,
  ShapeMismatch,
  FitFailed,
  ConfigInvalid,
  MissingArtifact,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace hamassim
