#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "tardisp/ast.hpp"

namespace tardisp {

struct RenderOptions {
  // Replaces `:name` in FROM/JOIN position with the returned text, if any.
  // Output using this hook is for display only and may not parse back.
  std::function<std::optional<std::string>(const std::string&)> variable_source;
  // Same for `:name` used as a scalar expression.
  std::function<std::optional<std::string>(const std::string&)> variable_expr;
};

/// Quotes with "..." when the name is reserved or not a plain identifier.
std::string render_identifier(std::string_view name);

std::string render_expr(const Expr& e, const RenderOptions& opts = {});
std::string render_query(const QueryAst& q, const RenderOptions& opts = {});

/// Multi-line procedure text; traced-record markers render as comments.
std::string render_procedure(const ProcedureAst& proc);

}  // namespace tardisp
