#include "dpn/error.hpp"

namespace dpn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kInvalidRotation: return "InvalidRotation";
    case ErrorCode::kDegenerateScale: return "DegenerateScale";
    case ErrorCode::kAlignmentUnderdetermined: return "AlignmentUnderdetermined";
    case ErrorCode::kInvalidGrid: return "InvalidGrid";
    case ErrorCode::kBandwidthExceedsGrid: return "BandwidthExceedsGrid";
    case ErrorCode::kNonRealSpectrum: return "NonRealSpectrum";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kInvalidLoss: return "InvalidLoss";
    case ErrorCode::kTrainingFault: return "TrainingFault";
    case ErrorCode::kRefineFault: return "RefineFault";
    case ErrorCode::kInvalidCategory: return "InvalidCategory";
    case ErrorCode::kDegenerateView: return "DegenerateView";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace dpn
