#include "photocov/error.hpp"

namespace photocov {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::ZeroBaseline: return "ZeroBaseline";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::OutsideImage: return "OutsideImage";
    case ErrorCode::InvalidDisparity: return "InvalidDisparity";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownTarget: return "UnknownTarget";
    case ErrorCode::MissingTable: return "MissingTable";
    case ErrorCode::MissingUncertainty: return "MissingUncertainty";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IOError: return "IOError";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::SingularInnerMatrix: return "SingularInnerMatrix";
    case ErrorCode::SingularDispCovariance: return "SingularDispCovariance";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegeneratePlane: return "DegeneratePlane";
    case ErrorCode::NonConvergent: return "NonConvergent";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::RankDeficient:
    case ErrorCode::InsufficientSamples:
    case ErrorCode::SingularInnerMatrix:
    case ErrorCode::SingularDispCovariance:
    case ErrorCode::NotPSD:
    case ErrorCode::ZeroVariance:
    case ErrorCode::DegeneratePlane:
    case ErrorCode::NonConvergent:
      return true;
    default:
      return false;
  }
}

}  // namespace photocov
