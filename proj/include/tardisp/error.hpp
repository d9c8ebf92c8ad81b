#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tardisp {

enum class ErrorCode {
  // storage
  DuplicateTable,
  UnknownTable,
  UnknownColumn,
  AmbiguousColumn,
  PrimaryKeyViolation,
  TypeMismatch,
  ClockMismatch,
  // frontend
  SyntaxError,
  InvalidQuery,
  UndeclaredVariable,
  // engine / runtime
  UnboundVariable,
  DivisionByZero,
  NumericOverflow,
  StepLimitExceeded,
  // tracer
  UnboundAtStep,
  UnknownVariable,
  MalformedTrace,
  // timetravel
  UnknownStep,
  UnknownStepName,
  NoKeyColumns,
  DiffKeyNotUnique,
  InvalidTimeDiff,
  ReadOnlyConsole,
  // debug service
  UnknownSession,
  FixtureError,
  BadRequest,
};

std::string_view error_code_name(ErrorCode code);

/// Position inside a source text. `offset` is a byte offset; line and column
/// are 1-based.
struct SourcePos {
  std::size_t offset = 0;
  std::size_t line = 1;
  std::size_t col = 1;

  friend bool operator==(const SourcePos&, const SourcePos&) = default;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}
  Error(ErrorCode code, std::string message, SourcePos pos)
      : std::runtime_error(std::move(message)), code_(code), pos_(pos) {}

  ErrorCode code() const noexcept { return code_; }
  const std::optional<SourcePos>& pos() const noexcept { return pos_; }
  const std::optional<uint32_t>& statement_id() const noexcept { return statement_id_; }

  void set_statement_id(uint32_t id) { statement_id_ = id; }
  void set_pos(SourcePos pos) { pos_ = pos; }

 private:
  ErrorCode code_;
  std::optional<SourcePos> pos_;
  std::optional<uint32_t> statement_id_;
};

}  // namespace tardisp
