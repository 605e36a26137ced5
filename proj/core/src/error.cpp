#include "granulometer/error.hpp"

namespace granulometer {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::UnsupportedDepth: return "UnsupportedDepth";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyAnnotation: return "EmptyAnnotation";
    case ErrorCode::Io: return "Io";
    case ErrorCode::LowContrast: return "LowContrast";
    case ErrorCode::NoScaleFound: return "NoScaleFound";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyNet: return "EmptyNet";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PackingFailure: return "PackingFailure";
    case ErrorCode::TiltExceedsLimit: return "TiltExceedsLimit";
    case ErrorCode::PolygonDegenerate: return "PolygonDegenerate";
    case ErrorCode::CoverageInfeasible: return "CoverageInfeasible";
  }
  return "Unknown";
}

}  // namespace granulometer
