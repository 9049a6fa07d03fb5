#pragma once

#include <cmath>
#include <string>

#include "e2p/error.hpp"

namespace e2p {

enum class MappingKind { Uniform, Sqrt, Log, Power };

/// Monotone depth mapping g on (0, inf) with derivative and inverse.
/// Power(p) generalizes: Uniform == Power(1), Sqrt == Power(0.5).
struct Mapping {
  MappingKind kind = MappingKind::Uniform;
  double exponent = 1.0;  // only meaningful for Power

  static Mapping uniform() { return {MappingKind::Uniform, 1.0}; }
  static Mapping sqrt() { return {MappingKind::Sqrt, 0.5}; }
  static Mapping log() { return {MappingKind::Log, 0.0}; }
  static Mapping power(double p) {
    require(p > 0.0, ErrorCategory::InvalidArgument, "power exponent must be > 0");
    return {MappingKind::Power, p};
  }

  double forward(double y) const {
    switch (kind) {
      case MappingKind::Uniform: return y;
      case MappingKind::Sqrt: return std::sqrt(y);
      case MappingKind::Log: return std::log(y);
      case MappingKind::Power: return std::pow(y, exponent);
    }
    return y;
  }

  double derivative(double y) const {
    switch (kind) {
      case MappingKind::Uniform: return 1.0;
      case MappingKind::Sqrt: return 0.5 / std::sqrt(y);
      case MappingKind::Log: return 1.0 / y;
      case MappingKind::Power: return exponent * std::pow(y, exponent - 1.0);
    }
    return 1.0;
  }

  double inverse(double z) const {
    switch (kind) {
      case MappingKind::Uniform: return z;
      case MappingKind::Sqrt: return z * z;
      case MappingKind::Log: return std::exp(z);
      case MappingKind::Power: return std::pow(z, 1.0 / exponent);
    }
    return z;
  }

  std::string name() const {
    switch (kind) {
      case MappingKind::Uniform: return "uni";
      case MappingKind::Sqrt: return "sqrt";
      case MappingKind::Log: return "log";
      case MappingKind::Power: return "power:" + std::to_string(exponent);
    }
    return "?";
  }
};

/// Parses the CLI spelling: uni | sqrt | log | power:P
inline Mapping mapping_from_string(const std::string& s) {
  if (s == "uni" || s == "uniform") return Mapping::uniform();
  if (s == "sqrt") return Mapping::sqrt();
  if (s == "log") return Mapping::log();
  if (s.rfind("power:", 0) == 0) return Mapping::power(std::stod(s.substr(6)));
  fail(ErrorCategory::InvalidArgument, "unknown mapping '" + s + "'");
}

}  // namespace e2p
