#include "emgkin/error.hpp"

namespace emgkin {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidBand: return "invalid-band";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kShapeMismatch: return "shape-mismatch";
    case ErrorKind::kNotSpd: return "not-spd";
    case ErrorKind::kRankDeficient: return "rank-deficient";
    case ErrorKind::kUndefinedCorrelation: return "undefined-correlation";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kValidation: return "validation";
    case ErrorKind::kUnsupportedLayout: return "unsupported-layout";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

}  // namespace emgkin
