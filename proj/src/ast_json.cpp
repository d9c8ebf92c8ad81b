#include "tardisp/ast_json.hpp"

namespace tardisp {

namespace {

using J = nlohmann::ordered_json;

const char* op_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "add";
    case BinaryOp::Sub: return "sub";
    case BinaryOp::Mul: return "mul";
    case BinaryOp::Div: return "div";
    case BinaryOp::Mod: return "mod";
    case BinaryOp::Eq: return "eq";
    case BinaryOp::Ne: return "ne";
    case BinaryOp::Lt: return "lt";
    case BinaryOp::Le: return "le";
    case BinaryOp::Gt: return "gt";
    case BinaryOp::Ge: return "ge";
    case BinaryOp::And: return "and";
    case BinaryOp::Or: return "or";
  }
  return "?";
}

const char* agg_name(AggregateFunc f) {
  switch (f) {
    case AggregateFunc::Sum: return "sum";
    case AggregateFunc::Count: return "count";
    case AggregateFunc::Min: return "min";
    case AggregateFunc::Max: return "max";
    case AggregateFunc::Avg: return "avg";
  }
  return "?";
}

J value_json(const Value& v) {
  J j;
  j["type"] = std::string(type_name(v.type()));
  switch (v.type()) {
    case Type::Null: j["value"] = nullptr; break;
    case Type::Bool: j["value"] = v.as_bool(); break;
    case Type::Int: j["value"] = v.as_int(); break;
    case Type::Float: j["value"] = v.as_float(); break;
    case Type::Text: j["value"] = v.as_text(); break;
  }
  return j;
}

J column_json(const ColumnRef& c) {
  J j;
  j["qualifier"] = c.qualifier ? J(*c.qualifier) : J(nullptr);
  j["column"] = c.column;
  return j;
}

J source_json(const TableSource& s) {
  J j;
  j["kind"] = s.is_variable ? "variable" : "table";
  j["name"] = s.name;
  j["alias"] = s.alias ? J(*s.alias) : J(nullptr);
  return j;
}

J statements_json(const std::vector<Statement>& body);

J statement_json(const Statement& s) {
  J j;
  j["id"] = s.id;
  j["span"] = {{"begin", {s.span.begin.line, s.span.begin.col}}, {"end", {s.span.end.line, s.span.end.col}}};
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, DeclareScalar>) {
          j["kind"] = "declare_scalar";
          j["name"] = node.name;
          j["type"] = std::string(type_name(node.type));
          j["init"] = node.init ? expr_to_json(*node.init) : J(nullptr);
        } else if constexpr (std::is_same_v<T, DeclareTable>) {
          j["kind"] = "declare_table";
          j["name"] = node.name;
        } else if constexpr (std::is_same_v<T, AssignScalar>) {
          j["kind"] = "assign_scalar";
          j["name"] = node.name;
          if (std::holds_alternative<Expr>(node.value)) {
            j["expr"] = expr_to_json(std::get<Expr>(node.value));
          } else {
            j["query"] = query_to_json(std::get<QueryAst>(node.value));
          }
        } else if constexpr (std::is_same_v<T, AssignTable>) {
          j["kind"] = "assign_table";
          j["name"] = node.name;
          j["query"] = query_to_json(node.query);
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          j["kind"] = "if";
          j["condition"] = expr_to_json(node.condition);
          j["then"] = statements_json(node.then_body);
          j["else"] = statements_json(node.else_body);
        } else if constexpr (std::is_same_v<T, WhileStmt>) {
          j["kind"] = "while";
          j["condition"] = expr_to_json(node.condition);
          j["body"] = statements_json(node.body);
        } else if constexpr (std::is_same_v<T, InsertStmt>) {
          j["kind"] = "insert";
          j["table"] = node.table;
          j["columns"] = node.columns;
          if (std::holds_alternative<QueryAst>(node.source)) {
            j["query"] = query_to_json(std::get<QueryAst>(node.source));
          } else {
            J rows = J::array();
            for (const auto& r : std::get<std::vector<std::vector<Expr>>>(node.source)) {
              J row = J::array();
              for (const auto& e : r) row.push_back(expr_to_json(e));
              rows.push_back(std::move(row));
            }
            j["values"] = std::move(rows);
          }
        } else if constexpr (std::is_same_v<T, UpdateStmt>) {
          j["kind"] = "update";
          j["table"] = node.table;
          J sets = J::array();
          for (const auto& [col, e] : node.assignments) sets.push_back({{"column", col}, {"expr", expr_to_json(e)}});
          j["set"] = std::move(sets);
          j["where"] = node.where ? expr_to_json(*node.where) : J(nullptr);
        } else if constexpr (std::is_same_v<T, DeleteStmt>) {
          j["kind"] = "delete";
          j["table"] = node.table;
          j["where"] = node.where ? expr_to_json(*node.where) : J(nullptr);
        } else if constexpr (std::is_same_v<T, TraceRecordStmt>) {
          j["kind"] = "trace_record";
          j["traced"] = node.traced;
        }
      },
      s.node);
  return j;
}

J statements_json(const std::vector<Statement>& body) {
  J arr = J::array();
  for (const auto& s : body) arr.push_back(statement_json(s));
  return arr;
}

}  // namespace

J expr_to_json(const Expr& e) {
  J j;
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Literal>) {
          j["kind"] = "literal";
          j.update(value_json(node.value));
        } else if constexpr (std::is_same_v<T, ColumnRef>) {
          j["kind"] = "column";
          j.update(column_json(node));
        } else if constexpr (std::is_same_v<T, QualifiedColumnRef>) {
          j["kind"] = "qualified_column";
          j["step_name"] = node.step_name;
          j.update(column_json(node.column));
        } else if constexpr (std::is_same_v<T, VariableRef>) {
          j["kind"] = "variable";
          j["name"] = node.name;
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          j["kind"] = node.op == UnaryOp::Not ? "not" : "neg";
          j["operand"] = expr_to_json(*node.operand);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          j["kind"] = op_name(node.op);
          j["lhs"] = expr_to_json(*node.lhs);
          j["rhs"] = expr_to_json(*node.rhs);
        } else if constexpr (std::is_same_v<T, IsNullExpr>) {
          j["kind"] = node.negated ? "is_not_null" : "is_null";
          j["operand"] = expr_to_json(*node.operand);
        } else if constexpr (std::is_same_v<T, InListExpr>) {
          j["kind"] = node.negated ? "not_in" : "in";
          j["operand"] = expr_to_json(*node.operand);
          J items = J::array();
          for (const auto& i : node.items) items.push_back(expr_to_json(i));
          j["items"] = std::move(items);
        } else if constexpr (std::is_same_v<T, AggregateExpr>) {
          j["kind"] = "aggregate";
          j["func"] = agg_name(node.func);
          j["arg"] = node.arg ? expr_to_json(**node.arg) : J("*");
        } else if constexpr (std::is_same_v<T, ExistsExpr>) {
          j["kind"] = "exists";
          j["query"] = query_to_json(*node.query);
        } else if constexpr (std::is_same_v<T, CaseExpr>) {
          j["kind"] = "case";
          J whens = J::array();
          for (const auto& [c, v] : node.whens) whens.push_back({{"when", expr_to_json(c)}, {"then", expr_to_json(v)}});
          j["whens"] = std::move(whens);
          j["else"] = node.otherwise ? expr_to_json(**node.otherwise) : J(nullptr);
        } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
          j["kind"] = "coalesce";
          J args = J::array();
          for (const auto& a : node.args) args.push_back(expr_to_json(a));
          j["args"] = std::move(args);
        }
      },
      e.node);
  return j;
}

J query_to_json(const QueryAst& q) {
  J j;
  J select = J::array();
  for (const auto& item : q.select) {
    J s;
    if (item.is_star()) {
      s["star"] = item.star_qualifier ? J(*item.star_qualifier) : J(true);
    } else {
      s["expr"] = expr_to_json(*item.expr);
    }
    s["alias"] = item.alias ? J(*item.alias) : J(nullptr);
    select.push_back(std::move(s));
  }
  j["select"] = std::move(select);
  j["from"] = q.from ? source_json(*q.from) : J(nullptr);
  J joins = J::array();
  for (const auto& jn : q.joins) {
    joins.push_back({{"kind", jn.kind == JoinKind::Left ? "left" : "inner"},
                     {"source", source_json(jn.source)},
                     {"on", expr_to_json(jn.on)}});
  }
  j["joins"] = std::move(joins);
  j["where"] = q.where ? expr_to_json(*q.where) : J(nullptr);
  J group = J::array();
  for (const auto& g : q.group_by) group.push_back(expr_to_json(g));
  j["group_by"] = std::move(group);
  J order = J::array();
  for (const auto& o : q.order_by) order.push_back({{"expr", expr_to_json(o.expr)}, {"desc", o.descending}});
  j["order_by"] = std::move(order);
  j["limit"] = q.limit ? J(*q.limit) : J(nullptr);
  if (!q.at_step) {
    j["at_step"] = nullptr;
  } else if (q.at_step->is_single()) {
    j["at_step"] = {{"single", q.at_step->single()}};
  } else {
    J named = J::array();
    for (const auto& n : q.at_step->named()) named.push_back({{"name", n.name}, {"step", n.step}});
    j["at_step"] = {{"named", std::move(named)}};
  }
  return j;
}

J procedure_to_json(const ProcedureAst& proc) {
  J j;
  j["name"] = proc.name;
  J params = J::array();
  for (const auto& p : proc.parameters) {
    params.push_back({{"name", p.name}, {"type", p.is_table ? std::string("TABLE") : std::string(type_name(p.type))}});
  }
  j["parameters"] = std::move(params);
  j["body"] = statements_json(proc.body);
  return j;
}

}  // namespace tardisp
