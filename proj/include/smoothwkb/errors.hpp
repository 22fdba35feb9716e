#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smoothwkb {

enum class ErrorCode {
  InvalidSpec,
  InvalidConfig,
  DomainError,
  NoRoot,
  AmbiguousRoot,
  SignViolation,
  QuadratureFailure,
  DivergentIntegral,
  DegenerateBasis,
  UnsupportedRegime,
  StartTooLate,
  StiffnessFailure,
  TailNotFree,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::NoRoot: return "NoRoot";
    case ErrorCode::AmbiguousRoot: return "AmbiguousRoot";
    case ErrorCode::SignViolation: return "SignViolation";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::DivergentIntegral: return "DivergentIntegral";
    case ErrorCode::DegenerateBasis: return "DegenerateBasis";
    case ErrorCode::UnsupportedRegime: return "UnsupportedRegime";
    case ErrorCode::StartTooLate: return "StartTooLate";
    case ErrorCode::StiffnessFailure: return "StiffnessFailure";
    case ErrorCode::TailNotFree: return "TailNotFree";
  }
  return "Unknown";
}

/// Every failure raised by the engine carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace smoothwkb
