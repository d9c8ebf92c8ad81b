#include "tardisp/error.hpp"

namespace tardisp {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateTable: return "DuplicateTable";
    case ErrorCode::UnknownTable: return "UnknownTable";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::AmbiguousColumn: return "AmbiguousColumn";
    case ErrorCode::PrimaryKeyViolation: return "PrimaryKeyViolation";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::ClockMismatch: return "ClockMismatch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::InvalidQuery: return "InvalidQuery";
    case ErrorCode::UndeclaredVariable: return "UndeclaredVariable";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::NumericOverflow: return "NumericOverflow";
    case ErrorCode::StepLimitExceeded: return "StepLimitExceeded";
    case ErrorCode::UnboundAtStep: return "UnboundAtStep";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::MalformedTrace: return "MalformedTrace";
    case ErrorCode::UnknownStep: return "UnknownStep";
    case ErrorCode::UnknownStepName: return "UnknownStepName";
    case ErrorCode::NoKeyColumns: return "NoKeyColumns";
    case ErrorCode::DiffKeyNotUnique: return "DiffKeyNotUnique";
    case ErrorCode::InvalidTimeDiff: return "InvalidTimeDiff";
    case ErrorCode::ReadOnlyConsole: return "ReadOnlyConsole";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::FixtureError: return "FixtureError";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

}  // namespace tardisp
