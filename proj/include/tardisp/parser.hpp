#pragma once

#include <string_view>
#include <vector>

#include "tardisp/ast.hpp"
#include "tardisp/storage.hpp"

namespace tardisp {

/// Parses one SELECT statement with optional trailing AT STEP clause.
/// Throws SyntaxError (with position and expected tokens) or InvalidQuery.
QueryAst parse_query(std::string_view text);

/// Parses a standalone expression (query context: bare identifiers are
/// columns).
Expr parse_expression(std::string_view text);

/// Parses `[CREATE] PROCEDURE name(params) [AS] BEGIN ... END`. Statement ids
/// are assigned in pre-order, starting at 1. Throws SyntaxError,
/// UndeclaredVariable or InvalidQuery.
ProcedureAst parse_procedure(std::string_view text);

/// Parses `CREATE TABLE name (col TYPE, ..., PRIMARY KEY (a, b));`
/// statements.
std::vector<TableDef> parse_ddl(std::string_view text);

/// Checks structural rules the grammar cannot express: GROUP BY items are
/// column references, non-aggregate select/order expressions only use
/// grouped columns, aggregates do not nest and do not appear in WHERE/ON,
/// subqueries carry no AT STEP clause. Throws InvalidQuery.
void validate_query(const QueryAst& q);

}  // namespace tardisp
