#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace photocov {

enum class ErrorCode {
  // Input validation.
  NonPositiveDepth,
  NonPositiveInput,
  ZeroBaseline,
  OutOfBounds,
  OutsideImage,
  InvalidDisparity,
  DimensionMismatch,
  UnknownTarget,
  MissingTable,
  MissingUncertainty,
  EmptyInput,
  InvalidSpec,
  InvalidConfig,
  MalformedHeader,
  TruncatedPayload,
  SchemaViolation,
  IOError,
  // Numerical failure.
  DegenerateGeometry,
  RankDeficient,
  InsufficientSamples,
  SingularInnerMatrix,
  SingularDispCovariance,
  NotPSD,
  ZeroVariance,
  DegeneratePlane,
  NonConvergent,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for codes that signal a numerical failure rather than bad input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace photocov
