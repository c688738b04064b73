// SPDX-License-Identifier: Apache-2.0
#include "prunekit/error.hpp"

namespace prunekit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyStats: return "EmptyStats";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::IndivisibleGroup: return "IndivisibleGroup";
    case ErrorCode::InvalidRatio: return "InvalidRatio";
    case ErrorCode::MissingCalibration: return "MissingCalibration";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace prunekit
