#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace granulometer {

enum class ErrorCode {
  // io
  MalformedHeader,
  TruncatedPayload,
  UnsupportedDepth,
  ParseError,
  EmptyAnnotation,
  Io,
  // delineation
  LowContrast,
  NoScaleFound,
  DimensionMismatch,
  // granulometry
  EmptyNet,
  EmptyInput,
  DomainError,
  TooFewPoints,
  NoConvergence,
  ZeroReference,
  InvalidArgument,
  // synthcam
  PackingFailure,
  // missionplan
  TiltExceedsLimit,
  PolygonDegenerate,
  CoverageInfeasible,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace granulometer
