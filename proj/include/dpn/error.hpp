#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpn {

enum class ErrorCode {
  kDegenerateInput,
  kInvalidRotation,
  kDegenerateScale,
  kAlignmentUnderdetermined,
  kInvalidGrid,
  kBandwidthExceedsGrid,
  kNonRealSpectrum,
  kShapeMismatch,
  kNonFinite,
  kInvalidLoss,
  kTrainingFault,
  kRefineFault,
  kInvalidCategory,
  kDegenerateView,
  kParseError,
  kInvalidConfig,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Every library fault is reported through this exception; `code()` lets
/// callers branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dpn
