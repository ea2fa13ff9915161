#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace entcat {

enum class ErrorCode {
  AllZero,
  NegativeEntry,
  DimMismatch,
  TargetTooSmall,
  NotIncomparable,
  DimTooSmall,
  Overflow,
  EmptySplit,
  MalformedRow,
  DimInconsistent,
  Underfull,
  EmptyDataset,
  InsufficientPoints,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AllZero: return "ALL_ZERO";
    case ErrorCode::NegativeEntry: return "NEGATIVE_ENTRY";
    case ErrorCode::DimMismatch: return "DIM_MISMATCH";
    case ErrorCode::TargetTooSmall: return "TARGET_TOO_SMALL";
    case ErrorCode::NotIncomparable: return "NOT_INCOMPARABLE";
    case ErrorCode::DimTooSmall: return "DIM_TOO_SMALL";
    case ErrorCode::Overflow: return "OVERFLOW";
    case ErrorCode::EmptySplit: return "EMPTY_SPLIT";
    case ErrorCode::MalformedRow: return "MALFORMED_ROW";
    case ErrorCode::DimInconsistent: return "DIM_INCONSISTENT";
    case ErrorCode::Underfull: return "UNDERFULL";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::InsufficientPoints: return "INSUFFICIENT_POINTS";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Io: return "IO";
  }
  return "UNKNOWN";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace entcat
