#include "qmix/error.hpp"

namespace qmix {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DegenerateAmplitudes: return "DegenerateAmplitudes";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllZeroRow: return "AllZeroRow";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::NegativeResponsibility: return "NegativeResponsibility";
    case ErrorCode::NonPositiveJoint: return "NonPositiveJoint";
    case ErrorCode::DegenerateWeights: return "DegenerateWeights";
    case ErrorCode::InfeasibleRegion: return "InfeasibleRegion";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IO: return "IO";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
  }
  return "Unknown";
}

}  // namespace qmix
