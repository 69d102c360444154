#pragma once

#include <stdexcept>
#include <string>

namespace supcal {

enum class ErrorCode {
  AngleAtBranchCut,
  KindMismatch,
  SingularCovariance,
  BoundsViolation,
  DimensionMismatch,
  NonPSDInput,
  SingularInnovation,
  AugmentationLimitExceeded,
  UnknownKeyframe,
  SingularC,
  MalformedLine,
  DanglingEdge,
  InvalidConfig,
  Io,
};

const char* to_string(ErrorCode code);

// Numerical failures map to exit code 3 in the CLI, data problems to 2.
bool is_numerical(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

class MalformedLineError : public Error {
 public:
  MalformedLineError(int line_no, int column, const std::string& reason);
  int line_no() const { return line_no_; }
  int column() const { return column_; }
  const std::string& reason() const { return reason_; }

 private:
  int line_no_;
  int column_;
  std::string reason_;
};

}  // namespace supcal
