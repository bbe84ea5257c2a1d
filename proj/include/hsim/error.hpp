#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsim {

enum class ErrorKind {
  NonConvergence,
  NotPositive,
  CompatibilityViolated,
  DimensionUnsupported,
  NotCoercive,
  ShootingFailed,
  BlowUp,
  NewtonDiverged,
  CFLViolation,
  WrapContamination,
  OutOfDomain,
  WeightTooSmall,
  ConfigInvalid,
  HypothesisViolated,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` distinguishes failure modes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NotPositive: return "NotPositive";
    case ErrorKind::CompatibilityViolated: return "CompatibilityViolated";
    case ErrorKind::DimensionUnsupported: return "DimensionUnsupported";
    case ErrorKind::NotCoercive: return "NotCoercive";
    case ErrorKind::ShootingFailed: return "ShootingFailed";
    case ErrorKind::BlowUp: return "BlowUp";
    case ErrorKind::NewtonDiverged: return "NewtonDiverged";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::WrapContamination: return "WrapContamination";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::WeightTooSmall: return "WeightTooSmall";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::HypothesisViolated: return "HypothesisViolated";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(ErrorKind::InvalidArgument, message);
}

}  // namespace hsim
