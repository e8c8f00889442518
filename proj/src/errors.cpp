#include "trajkit/errors.hpp"

namespace trajkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kBehindCamera: return "behind-camera";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kNoSolution: return "no-solution";
    case ErrorKind::kModeViolation: return "mode-violation";
    case ErrorKind::kInitialization: return "initialization";
    case ErrorKind::kUndefinedMetric: return "undefined-metric";
    case ErrorKind::kParse: return "parse";
  }
  return "unknown";
}

}  // namespace trajkit
