#include "tardisp/ast.hpp"

#include <algorithm>

namespace tardisp {

Expr make_literal(Value v) { return Expr{Literal{std::move(v)}}; }
Expr make_column(std::string qualifier, std::string column) {
  return Expr{ColumnRef{std::move(qualifier), std::move(column)}};
}
Expr make_column(std::string column) { return Expr{ColumnRef{std::nullopt, std::move(column)}}; }
Expr make_variable(std::string name) { return Expr{VariableRef{std::move(name)}}; }
Expr make_binary(BinaryOp op, Expr lhs, Expr rhs) { return Expr{BinaryExpr{op, std::move(lhs), std::move(rhs)}}; }
Expr make_unary(UnaryOp op, Expr operand) { return Expr{UnaryExpr{op, std::move(operand)}}; }

std::vector<std::pair<std::string, bool>> ProcedureAst::variables() const {
  std::vector<std::pair<std::string, bool>> out;
  for (const auto& p : parameters) out.emplace_back(p.name, p.is_table);
  for_each_statement(body, [&](const Statement& s) {
    if (s.is<DeclareScalar>()) out.emplace_back(s.as<DeclareScalar>().name, false);
    if (s.is<DeclareTable>()) out.emplace_back(s.as<DeclareTable>().name, true);
  });
  return out;
}

const Statement* ProcedureAst::find_statement(StatementId id) const {
  const Statement* found = nullptr;
  for_each_statement(body, [&](const Statement& s) {
    if (s.id == id) found = &s;
  });
  return found;
}

void visit_expr(const Expr& e, const std::function<void(const Expr&)>& f, bool into_subqueries) {
  f(e);
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, UnaryExpr>) {
          visit_expr(*node.operand, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          visit_expr(*node.lhs, f, into_subqueries);
          visit_expr(*node.rhs, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, IsNullExpr>) {
          visit_expr(*node.operand, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, InListExpr>) {
          visit_expr(*node.operand, f, into_subqueries);
          for (const auto& i : node.items) visit_expr(i, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, AggregateExpr>) {
          if (node.arg) visit_expr(**node.arg, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, CaseExpr>) {
          for (const auto& [c, v] : node.whens) {
            visit_expr(c, f, into_subqueries);
            visit_expr(v, f, into_subqueries);
          }
          if (node.otherwise) visit_expr(**node.otherwise, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
          for (const auto& a : node.args) visit_expr(a, f, into_subqueries);
        } else if constexpr (std::is_same_v<T, ExistsExpr>) {
          if (into_subqueries) visit_query_exprs(*node.query, f, true);
        }
      },
      e.node);
}

void visit_query_exprs(const QueryAst& q, const std::function<void(const Expr&)>& f, bool into_subqueries) {
  for (const auto& item : q.select) {
    if (item.expr) visit_expr(*item.expr, f, into_subqueries);
  }
  for (const auto& j : q.joins) visit_expr(j.on, f, into_subqueries);
  if (q.where) visit_expr(*q.where, f, into_subqueries);
  for (const auto& g : q.group_by) visit_expr(g, f, into_subqueries);
  for (const auto& o : q.order_by) visit_expr(o.expr, f, into_subqueries);
}

namespace {

void collect_variables(const QueryAst& q, std::vector<std::string>& out) {
  auto add = [&](const std::string& name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  };
  if (q.from && q.from->is_variable) add(q.from->name);
  for (const auto& j : q.joins) {
    if (j.source.is_variable) add(j.source.name);
  }
  visit_query_exprs(q, [&](const Expr& e) {
    if (e.is<VariableRef>()) add(e.as<VariableRef>().name);
    if (e.is<ExistsExpr>()) collect_variables(*e.as<ExistsExpr>().query, out);
  });
}

}  // namespace

std::vector<std::string> referenced_variables(const QueryAst& q) {
  std::vector<std::string> out;
  collect_variables(q, out);
  return out;
}

}  // namespace tardisp
