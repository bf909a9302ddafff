#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pulsedho {

enum class ErrorCode {
  InvalidInput,
  DeltaNotEvaluable,
  NegativeTime,
  KindMismatch,
  ErfApproxOutOfRange,
  TruncationBudgetExceeded,
  StepTooLarge,
  GridMismatch,
  NotConverged,
  SingularJacobian,
  InsufficientData,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DeltaNotEvaluable: return "DeltaNotEvaluable";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::ErfApproxOutOfRange: return "ErfApproxOutOfRange";
    case ErrorCode::TruncationBudgetExceeded: return "TruncationBudgetExceeded";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::InsufficientData: return "InsufficientData";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pulsedho
