#pragma once

#include <stdexcept>
#include <string>

namespace qmix {

enum class ErrorCode {
  NotPositiveDefinite,
  DegenerateAmplitudes,
  LengthMismatch,
  AllZeroRow,
  EmptyClass,
  ConstraintViolation,
  NegativeResponsibility,
  NonPositiveJoint,
  DegenerateWeights,
  InfeasibleRegion,
  UnsupportedFormat,
  InvalidArgument,
  IO,
  TooManyFailures,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qmix
