#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace selfsim {

enum class ErrorKind {
  RangeViolation,
  ConfigError,
  RegimeError,
  NonHyperbolic,
  SeedError,
  BracketError,
  OffSurface,
  DegenerateSample,
  NoInterface,
  GridOutsideSupport,
  StepUnderflow,
  NegativeUndershoot,
  Unclassifiable,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::RangeViolation: return "RangeViolation";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::RegimeError: return "RegimeError";
    case ErrorKind::NonHyperbolic: return "NonHyperbolic";
    case ErrorKind::SeedError: return "SeedError";
    case ErrorKind::BracketError: return "BracketError";
    case ErrorKind::OffSurface: return "OffSurface";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::NoInterface: return "NoInterface";
    case ErrorKind::GridOutsideSupport: return "GridOutsideSupport";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::NegativeUndershoot: return "NegativeUndershoot";
    case ErrorKind::Unclassifiable: return "Unclassifiable";
  }
  return "Unknown";
}

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

}  // namespace selfsim
