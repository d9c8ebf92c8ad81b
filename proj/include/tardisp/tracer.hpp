#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tardisp/ast.hpp"
#include "tardisp/engine.hpp"
#include "tardisp/runtime.hpp"
#include "tardisp/storage.hpp"

namespace tardisp {

inline constexpr const char* kTraceRunsTable = "TRACE_RUNS";
inline constexpr const char* kTraceEventsTable = "TRACE_EVENTS";
inline constexpr const char* kTraceScalarsTable = "TRACE_SCALARS";

using TraceId = int64_t;

struct TraceEvent {
  LogicalTime step = 0;
  std::optional<LogicalTime> parent_step;
  StatementId statement_id = 0;
  StepKind kind = StepKind::AssignScalar;
  std::optional<std::string> var;
  std::optional<Value> scalar_value;
  std::optional<std::string> query_id;
  LogicalTime db_time = 0;
  std::optional<uint64_t> row_count;
  std::optional<bool> condition;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Query id used for the table assignment at statement `id`.
std::string query_id_for(StatementId id);

struct QueryEntry {
  std::string query_id;
  StatementId statement = 0;
  std::string var;
  QueryAst query;
  std::vector<std::string> arguments;  // referenced variables, first-use order
};

/// Every table-assignment query of a procedure, by query id.
class QueryRegistry {
 public:
  static QueryRegistry from_procedure(const ProcedureAst& proc);
  const QueryEntry& at(const std::string& query_id) const;
  const QueryEntry* find(const std::string& query_id) const;
  const std::map<std::string, QueryEntry>& entries() const { return entries_; }

 private:
  std::map<std::string, QueryEntry> entries_;
};

/// A completed (or aborted) traced run, as read back from the trace tables.
struct Trace {
  TraceId trace_id = 0;
  std::string procedure_name;
  std::string source;
  std::shared_ptr<const ProcedureAst> procedure;
  Environment args;  // bound parameters, as of start_clock
  LogicalTime start_clock = 0;
  LogicalTime end_clock = 0;
  std::optional<std::string> error;
  std::optional<std::string> error_code;
  std::optional<StatementId> error_statement;
  std::vector<TraceEvent> events;  // by step, gap-free from start_clock + 1

  bool empty() const { return events.empty(); }
  LogicalTime first_step() const { return events.empty() ? start_clock : events.front().step; }
  LogicalTime last_step() const { return events.empty() ? start_clock : events.back().step; }
  const TraceEvent* event_at(LogicalTime step) const;

  /// Declared variables and parameters; true for table variables.
  const std::map<std::string, bool>& variables() const { return variables_; }
  bool is_parameter(const std::string& name) const;
  /// Steps of assignment events for `var`, ascending.
  const std::vector<LogicalTime>& assignments(const std::string& var) const;

  /// Builds the lookup indexes; called by load_trace.
  void index();

 private:
  std::map<std::string, bool> variables_;
  std::map<std::string, std::vector<LogicalTime>> assignments_;
};

/// Adds a TraceRecordStmt after every instruction (at the head of both IF
/// branches and of a WHILE body, and after the WHILE for its exit test).
/// User statements keep their ids; records get fresh ids above them.
ProcedureAst instrument(const ProcedureAst& proc);

void ensure_trace_tables(Database& db);

struct TracedRun {
  TraceId trace_id = 0;
  std::optional<RunResult> result;  // absent when the run failed
  std::optional<Error> error;
};

/// Instruments and runs `proc` with tracing on. The trace rows go into the
/// trace tables of `db`; a failing run still records its partial trace and
/// the error. `extra` observes every step as well.
TracedRun run_traced(const ProcedureAst& proc, const std::string& source, const Environment& args, Database& db,
                     ExecutionConfig cfg = {}, StepSink* extra = nullptr);

/// Reads a trace back from the database and checks it. MalformedTrace on
/// gaps, bad parents or missing fields.
Trace load_trace(const Database& db, TraceId trace_id);
std::vector<TraceId> list_traces(const Database& db);

/// View definitions for every table variable: one `V_<var>_<statement>` per
/// assignment site and a `V_<var>__MASTER` choosing among them, plus
/// `S_<var>` lookups for scalars. Step parameters are written as `:at` and
/// `:step`.
std::string emit_reconstruction_views(const ProcedureAst& proc);

/// Rebuilds variable values at past steps from the trace. Table values
/// re-run the assignment query at its step with arguments rebuilt at
/// step - 1; results are memoized per assignment. Safe for concurrent use.
class Reconstructor {
 public:
  Reconstructor(const Trace& trace, const QueryRegistry& registry, const Database& db);

  Value scalar(const std::string& var, LogicalTime step) const;
  TableBinding table(const std::string& var, LogicalTime step) const;
  Binding value(const std::string& var, LogicalTime step) const;

  /// Step of the assignment governing `var` at `step` (start_clock for an
  /// untouched parameter); nullopt when unbound.
  std::optional<LogicalTime> governing_step(const std::string& var, LogicalTime step) const;

  /// Variables bound at `step`, sorted by name.
  std::vector<std::string> in_scope(LogicalTime step) const;
  Environment environment_at(LogicalTime step) const;

  const Trace& trace() const { return trace_; }
  const QueryRegistry& registry() const { return registry_; }
  const Database& db() const { return db_; }

 private:
  void check_known(const std::string& var) const;
  TableBinding table_for_event(const TraceEvent& e) const;

  const Trace& trace_;
  const QueryRegistry& registry_;
  const Database& db_;
  mutable std::mutex memo_mutex_;
  mutable std::map<LogicalTime, TableBinding> memo_;  // by assignment step
};

enum class NavDirection { Prev, Next };

/// Nearest assignment of `var` strictly before / after `step`.
std::optional<LogicalTime> assignment_nav(const Trace& trace, const std::string& var, LogicalTime step,
                                          NavDirection dir);

class ExecutionTree {
 public:
  static ExecutionTree build(const std::vector<TraceEvent>& events);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<TraceEvent>& nodes() const { return nodes_; }
  const std::vector<LogicalTime>& roots() const { return roots_; }
  const std::vector<LogicalTime>& children(LogicalTime step) const;
  std::optional<LogicalTime> parent(LogicalTime step) const;
  const TraceEvent& node(LogicalTime step) const;
  bool contains(LogicalTime step) const;
  /// Next node after `step` at the same level (same parent), if any.
  std::optional<LogicalTime> next_sibling(LogicalTime step) const;

 private:
  std::vector<TraceEvent> nodes_;
  LogicalTime first_ = 0;
  std::vector<LogicalTime> roots_;
  std::vector<std::vector<LogicalTime>> children_;
};

inline ExecutionTree build_execution_tree(const std::vector<TraceEvent>& events) {
  return ExecutionTree::build(events);
}

}  // namespace tardisp
