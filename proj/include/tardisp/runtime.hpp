#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tardisp/ast.hpp"
#include "tardisp/engine.hpp"
#include "tardisp/storage.hpp"

namespace tardisp {

struct ExecutionConfig {
  uint64_t max_steps = 1'000'000;
  // When off, TraceRecordStmt nodes are skipped.
  bool tracing = false;
};

enum class StepKind { AssignScalar, AssignTable, Dml, Branch, LoopIter };

std::string_view step_kind_name(StepKind kind);
std::optional<StepKind> parse_step_kind(std::string_view name);

/// What one executed instruction did. `step` is also the database time the
/// instruction ran at.
struct StepRecord {
  LogicalTime step = 0;
  std::optional<LogicalTime> parent;  // innermost enclosing Branch/LoopIter step
  StatementId statement = 0;
  StepKind kind = StepKind::AssignScalar;
  std::optional<std::string> var;
  std::optional<Value> scalar;      // AssignScalar
  std::optional<uint64_t> row_count;  // AssignTable: result rows; Dml: affected rows
  std::optional<bool> condition;    // Branch / LoopIter

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

/// Observer hooks. on_step fires after every instruction; on_trace_record
/// fires when an instrumented procedure reaches a TraceRecordStmt (tracing
/// on), with the record of the instruction it follows.
class StepSink {
 public:
  virtual ~StepSink() = default;
  virtual void on_step(const StepRecord& /*rec*/, const Environment& /*env*/, const Database& /*db*/) {}
  virtual void on_trace_record(const StepRecord& /*rec*/, Database& /*db*/) {}
};

struct RunResult {
  Environment env;
  LogicalTime start_clock = 0;  // clock before the first instruction
  LogicalTime end_clock = 0;
  uint64_t steps = 0;
};

/// Binds arguments to parameters: scalars are coerced to the declared type,
/// table arguments are snapshotted. Throws InvalidQuery / TypeMismatch.
Environment bind_arguments(const ProcedureAst& proc, const Environment& args);

/// Interprets `proc`. Each executed instruction advances the clock exactly
/// once: assignments (including DECLARE with an initializer), DML, IF
/// condition evaluations and every WHILE condition evaluation (the final,
/// false one included). Takes the database's writer slot for the whole run.
///
/// On failure the error carries the failing statement id; everything done
/// before it (including trace rows) stays in the database.
RunResult run(const ProcedureAst& proc, const Environment& args, Database& db, const ExecutionConfig& cfg = {},
              StepSink* sink = nullptr);

}  // namespace tardisp
