// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prunekit {

enum class ErrorCode {
  MagicMismatch,
  ShapeMismatch,
  TruncatedPayload,
  IoFailure,
  InvariantViolation,
  InvalidDimension,
  DimensionMismatch,
  NonFiniteInput,
  EmptyStats,
  InsufficientSamples,
  SingularGram,
  IndivisibleGroup,
  InvalidRatio,
  MissingCalibration,
  InstanceTooLarge,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` identifies the failure
/// class so callers (and tests) can branch without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace prunekit
