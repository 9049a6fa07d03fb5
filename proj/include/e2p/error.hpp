#pragma once

#include <stdexcept>
#include <string>

namespace e2p {

enum class ErrorCategory {
  BadMagic,
  Truncated,
  BadRank,
  EmptyTensor,
  IoFailure,
  BadRange,
  DegenerateRange,
  ShapeMismatch,
  InvalidArgument,
  ZeroNorm,
  NonFinite,
  Corrupt,
  VersionMismatch,
  HashMismatch,
  Divergence,
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::BadMagic: return "BadMagic";
    case ErrorCategory::Truncated: return "Truncated";
    case ErrorCategory::BadRank: return "BadRank";
    case ErrorCategory::EmptyTensor: return "EmptyTensor";
    case ErrorCategory::IoFailure: return "IoFailure";
    case ErrorCategory::BadRange: return "BadRange";
    case ErrorCategory::DegenerateRange: return "DegenerateRange";
    case ErrorCategory::ShapeMismatch: return "ShapeMismatch";
    case ErrorCategory::InvalidArgument: return "InvalidArgument";
    case ErrorCategory::ZeroNorm: return "ZeroNorm";
    case ErrorCategory::NonFinite: return "NonFinite";
    case ErrorCategory::Corrupt: return "Corrupt";
    case ErrorCategory::VersionMismatch: return "VersionMismatch";
    case ErrorCategory::HashMismatch: return "HashMismatch";
    case ErrorCategory::Divergence: return "Divergence";
  }
  return "Unknown";
}

/// All library errors carry a machine-parsable category plus a human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(std::string(to_string(cat)) + ": " + msg), cat_(cat) {}

  ErrorCategory category() const { return cat_; }

 private:
  ErrorCategory cat_;
};

[[noreturn]] inline void fail(ErrorCategory cat, const std::string& msg) {
  throw Error(cat, msg);
}

inline void require(bool cond, ErrorCategory cat, const std::string& msg) {
  if (!cond) fail(cat, msg);
}

}  // namespace e2p
