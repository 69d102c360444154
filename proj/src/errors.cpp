#include "supcal/errors.hpp"

namespace supcal {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleAtBranchCut: return "AngleAtBranchCut";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::BoundsViolation: return "BoundsViolation";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPSDInput: return "NonPSDInput";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::AugmentationLimitExceeded: return "AugmentationLimitExceeded";
    case ErrorCode::UnknownKeyframe: return "UnknownKeyframe";
    case ErrorCode::SingularC: return "SingularC";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DanglingEdge: return "DanglingEdge";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleAtBranchCut:
    case ErrorCode::SingularCovariance:
    case ErrorCode::SingularInnovation:
    case ErrorCode::SingularC:
    case ErrorCode::NonPSDInput:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

MalformedLineError::MalformedLineError(int line_no, int column, const std::string& reason)
    : Error(ErrorCode::MalformedLine,
            "line " + std::to_string(line_no) + ", column " + std::to_string(column) + ": " + reason),
      line_no_(line_no),
      column_(column),
      reason_(reason) {}

}  // namespace supcal
