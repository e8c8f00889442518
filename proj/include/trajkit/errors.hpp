#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trajkit {

enum class ErrorKind {
  kInvalidArgument,
  kBehindCamera,
  kDegenerate,
  kInsufficientData,
  kNoSolution,
  kModeViolation,
  kInitialization,
  kUndefinedMetric,
  kParse,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const char* what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace trajkit
