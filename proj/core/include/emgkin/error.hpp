#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emgkin {

enum class ErrorKind {
  kInvalidBand,
  kInvalidInput,
  kInsufficientData,
  kShapeMismatch,
  kNotSpd,
  kRankDeficient,
  kUndefinedCorrelation,
  kDivergence,
  kValidation,
  kUnsupportedLayout,
  kIo,
};

std::string_view to_string(ErrorKind kind) noexcept;

// All library failures are reported through this exception type. The kind is
// stable and machine-readable; the message carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace emgkin
