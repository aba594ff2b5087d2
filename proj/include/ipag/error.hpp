#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ipag {

enum class ErrorCode {
  kDimensionMismatch,
  kSlaterViolation,
  kInvalidAlpha,
  kInvalidHorizon,
  kDegenerateWeights,
  kBudgetZero,
  kUnsupportedSet,
  kCertificateUnavailable,
  kNonFiniteIterate,
  kOddDimension,
  kDimensionTooLarge,
  kInvalidArgument,
  kParseError,
  kValidationError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. The code identifies the failure class so callers
/// (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ipag
