#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tardisp/ast.hpp"
#include "tardisp/engine.hpp"
#include "tardisp/tracer.hpp"

namespace tardisp {

/// Throws UnknownStep unless 0 <= step <= last step of the trace.
LogicalTime check_step(const Trace& trace, uint64_t step);

/// A single-step query made executable: variables bound to their values at
/// the step, base tables read as of the step.
struct RewrittenQuery {
  QueryAst query;  // AT STEP removed
  Environment env;
  LogicalTime at = 0;
};

/// `q` must carry a single AT STEP and no time qualifiers.
RewrittenQuery rewrite_at_step(const QueryAst& q, const Reconstructor& rc);
Relation execute_at_step(const QueryAst& q, const Reconstructor& rc);

/// One non-key output column of a diff row. `values[i]` is absent when the
/// row is missing from step i's partial result (distinct from NULL).
struct DiffCell {
  std::vector<std::optional<Value>> values;
  std::vector<bool> changed_from_prev;                     // per adjacent pair
  std::vector<std::optional<LogicalTime>> pair_jump_steps;  // per adjacent pair
  std::optional<LogicalTime> jump_step;  // jump of the latest attributable changed pair
};

struct DiffRow {
  Row key;
  std::vector<DiffCell> cells;
};

struct DiffTable {
  std::vector<std::string> key_columns;
  std::vector<std::string> value_columns;
  std::vector<std::string> step_names;
  std::vector<LogicalTime> steps;
  std::vector<DiffRow> rows;  // sorted by key
};

/// Runs `q` once per named step without its time-specific WHERE conjuncts,
/// full-outer-joins the partial results on the key columns, then filters
/// with the time-specific conjuncts and computes change flags.
///
/// Key columns: with GROUP BY, the grouped columns whose lineage is a
/// primary-key column (all grouped columns if none is); otherwise the
/// selected primary-key columns.
DiffTable execute_time_diff(const QueryAst& q, const Reconstructor& rc);

/// What one partial execution of a time-diff query runs: the query without
/// its time-specific conjuncts, qualifiers stripped, AT STEP `step`.
QueryAst partial_query(const QueryAst& diff_query, LogicalTime step);

/// valid_from of the earliest version of the row with primary key `pk` in
/// (t_low, t_high] whose `column` differs from its predecessor's (a row
/// appearing counts as a change); nullopt if there is none.
std::optional<LogicalTime> find_change_origin(const Database& db, std::string_view table, const Row& pk,
                                              std::string_view column, LogicalTime t_low, LogicalTime t_high);

/// Same window, latest change instead of the earliest.
std::optional<LogicalTime> find_last_change(const Database& db, std::string_view table, const Row& pk,
                                            std::string_view column, LogicalTime t_low, LogicalTime t_high);

using ConsoleResult = std::variant<Relation, DiffTable>;

/// Read-only console: DML is ReadOnlyConsole; without AT STEP the query runs
/// at `cursor`.
ConsoleResult console_query(std::string_view text, const Reconstructor& rc, LogicalTime cursor);

}  // namespace tardisp
