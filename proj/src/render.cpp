#include "tardisp/render.hpp"

#include <cctype>

#include "tardisp/lexer.hpp"

namespace tardisp {

namespace {

constexpr int kPrecOr = 1;
constexpr int kPrecAnd = 2;
constexpr int kPrecNot = 3;
constexpr int kPrecCmp = 4;
constexpr int kPrecAdd = 5;
constexpr int kPrecMul = 6;
constexpr int kPrecNeg = 7;
constexpr int kPrecPrimary = 8;

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return kPrecOr;
    case BinaryOp::And: return kPrecAnd;
    case BinaryOp::Add:
    case BinaryOp::Sub: return kPrecAdd;
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Mod: return kPrecMul;
    default: return kPrecCmp;
  }
}

const char* spelling(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Eq: return "=";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "AND";
    case BinaryOp::Or: return "OR";
  }
  return "?";
}

const char* spelling(AggregateFunc f) {
  switch (f) {
    case AggregateFunc::Sum: return "SUM";
    case AggregateFunc::Count: return "COUNT";
    case AggregateFunc::Min: return "MIN";
    case AggregateFunc::Max: return "MAX";
    case AggregateFunc::Avg: return "AVG";
  }
  return "?";
}

int precedence(const Expr& e) {
  if (e.is<BinaryExpr>()) return precedence(e.as<BinaryExpr>().op);
  if (e.is<UnaryExpr>()) return e.as<UnaryExpr>().op == UnaryOp::Not ? kPrecNot : kPrecNeg;
  if (e.is<IsNullExpr>() || e.is<InListExpr>()) return kPrecCmp;
  return kPrecPrimary;
}

std::string column_text(const ColumnRef& c) {
  std::string out;
  if (c.qualifier) out = render_identifier(*c.qualifier) + ".";
  return out + render_identifier(c.column);
}

void render(const Expr& e, int min_prec, std::string& out, const RenderOptions& opts);

void render_at(const Expr& e, int min_prec, std::string& out, const RenderOptions& opts) {
  if (precedence(e) < min_prec) {
    out += '(';
    render(e, kPrecOr, out, opts);
    out += ')';
  } else {
    render(e, min_prec, out, opts);
  }
}

void render(const Expr& e, int /*min_prec*/, std::string& out, const RenderOptions& opts) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, Literal>) {
          out += to_sql_literal(node.value);
        } else if constexpr (std::is_same_v<T, ColumnRef>) {
          out += column_text(node);
        } else if constexpr (std::is_same_v<T, QualifiedColumnRef>) {
          out += render_identifier(node.step_name) + "!" + column_text(node.column);
        } else if constexpr (std::is_same_v<T, VariableRef>) {
          std::optional<std::string> replaced;
          if (opts.variable_expr) replaced = opts.variable_expr(node.name);
          out += replaced ? *replaced : ":" + render_identifier(node.name);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          if (node.op == UnaryOp::Not) {
            out += "NOT ";
            render_at(*node.operand, kPrecNot, out, opts);
          } else {
            out += '-';
            std::string inner;
            render_at(*node.operand, kPrecNeg, inner, opts);
            // "-5" would read back as a literal and "--" starts a comment.
            if (node.operand->template is<Literal>() || inner.front() == '-') {
              out += "(" + inner + ")";
            } else {
              out += inner;
            }
          }
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          int p = precedence(node.op);
          bool non_assoc = p == kPrecCmp;
          render_at(*node.lhs, non_assoc ? p + 1 : p, out, opts);
          out += ' ';
          out += spelling(node.op);
          out += ' ';
          render_at(*node.rhs, p + 1, out, opts);
        } else if constexpr (std::is_same_v<T, IsNullExpr>) {
          render_at(*node.operand, kPrecAdd, out, opts);
          out += node.negated ? " IS NOT NULL" : " IS NULL";
        } else if constexpr (std::is_same_v<T, InListExpr>) {
          render_at(*node.operand, kPrecAdd, out, opts);
          out += node.negated ? " NOT IN (" : " IN (";
          for (std::size_t i = 0; i < node.items.size(); ++i) {
            if (i) out += ", ";
            render_at(node.items[i], kPrecOr, out, opts);
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, AggregateExpr>) {
          out += spelling(node.func);
          out += '(';
          if (node.arg) {
            render_at(**node.arg, kPrecOr, out, opts);
          } else {
            out += '*';
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, ExistsExpr>) {
          out += "EXISTS (" + render_query(*node.query, opts) + ")";
        } else if constexpr (std::is_same_v<T, CaseExpr>) {
          out += "CASE";
          for (const auto& [c, v] : node.whens) {
            out += " WHEN ";
            render_at(c, kPrecOr, out, opts);
            out += " THEN ";
            render_at(v, kPrecOr, out, opts);
          }
          if (node.otherwise) {
            out += " ELSE ";
            render_at(**node.otherwise, kPrecOr, out, opts);
          }
          out += " END";
        } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
          out += "COALESCE(";
          for (std::size_t i = 0; i < node.args.size(); ++i) {
            if (i) out += ", ";
            render_at(node.args[i], kPrecOr, out, opts);
          }
          out += ')';
        }
      },
      e.node);
}

std::string source_text(const TableSource& src, const RenderOptions& opts) {
  std::string out;
  std::optional<std::string> replaced;
  if (src.is_variable && opts.variable_source) replaced = opts.variable_source(src.name);
  if (replaced) {
    out = *replaced;
  } else {
    out = (src.is_variable ? ":" : "") + render_identifier(src.name);
  }
  if (src.alias) {
    out += " " + render_identifier(*src.alias);
  } else if (replaced) {
    out += " " + render_identifier(src.name);
  }
  return out;
}

void indent(std::string& out, int depth) { out.append(static_cast<std::size_t>(depth) * 2, ' '); }

void render_body(const std::vector<Statement>& body, int depth, std::string& out);

void render_statement(const Statement& s, int depth, std::string& out) {
  indent(out, depth);
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, DeclareScalar>) {
          out += "DECLARE " + render_identifier(node.name) + " " + std::string(type_name(node.type));
          if (node.init) out += " = " + render_expr(*node.init);
          out += ";\n";
        } else if constexpr (std::is_same_v<T, DeclareTable>) {
          out += "DECLARE " + render_identifier(node.name) + " TABLE;\n";
        } else if constexpr (std::is_same_v<T, AssignScalar>) {
          out += render_identifier(node.name) + " = ";
          if (std::holds_alternative<Expr>(node.value)) {
            out += render_expr(std::get<Expr>(node.value));
          } else {
            out += render_query(std::get<QueryAst>(node.value));
          }
          out += ";\n";
        } else if constexpr (std::is_same_v<T, AssignTable>) {
          out += render_identifier(node.name) + " = " + render_query(node.query) + ";\n";
        } else if constexpr (std::is_same_v<T, IfStmt>) {
          out += "IF " + render_expr(node.condition) + " THEN\n";
          render_body(node.then_body, depth + 1, out);
          if (!node.else_body.empty()) {
            indent(out, depth);
            out += "ELSE\n";
            render_body(node.else_body, depth + 1, out);
          }
          indent(out, depth);
          out += "END IF;\n";
        } else if constexpr (std::is_same_v<T, WhileStmt>) {
          out += "WHILE " + render_expr(node.condition) + " DO\n";
          render_body(node.body, depth + 1, out);
          indent(out, depth);
          out += "END WHILE;\n";
        } else if constexpr (std::is_same_v<T, InsertStmt>) {
          out += "INSERT INTO " + render_identifier(node.table);
          if (!node.columns.empty()) {
            out += " (";
            for (std::size_t i = 0; i < node.columns.size(); ++i) {
              if (i) out += ", ";
              out += render_identifier(node.columns[i]);
            }
            out += ")";
          }
          if (std::holds_alternative<QueryAst>(node.source)) {
            out += " " + render_query(std::get<QueryAst>(node.source));
          } else {
            out += " VALUES ";
            const auto& rows = std::get<std::vector<std::vector<Expr>>>(node.source);
            for (std::size_t r = 0; r < rows.size(); ++r) {
              if (r) out += ", ";
              out += "(";
              for (std::size_t i = 0; i < rows[r].size(); ++i) {
                if (i) out += ", ";
                out += render_expr(rows[r][i]);
              }
              out += ")";
            }
          }
          out += ";\n";
        } else if constexpr (std::is_same_v<T, UpdateStmt>) {
          out += "UPDATE " + render_identifier(node.table) + " SET ";
          for (std::size_t i = 0; i < node.assignments.size(); ++i) {
            if (i) out += ", ";
            out += render_identifier(node.assignments[i].first) + " = " + render_expr(node.assignments[i].second);
          }
          if (node.where) out += " WHERE " + render_expr(*node.where);
          out += ";\n";
        } else if constexpr (std::is_same_v<T, DeleteStmt>) {
          out += "DELETE FROM " + render_identifier(node.table);
          if (node.where) out += " WHERE " + render_expr(*node.where);
          out += ";\n";
        } else if constexpr (std::is_same_v<T, TraceRecordStmt>) {
          out += "-- TRACE RECORD " + std::to_string(node.traced) + "\n";
        }
      },
      s.node);
}

void render_body(const std::vector<Statement>& body, int depth, std::string& out) {
  for (const auto& s : body) render_statement(s, depth, out);
}

}  // namespace

std::string render_identifier(std::string_view name) {
  bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_');
  for (char c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') plain = false;
  }
  if (plain && !is_reserved_word(name)) return std::string(name);
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_expr(const Expr& e, const RenderOptions& opts) {
  std::string out;
  render_at(e, kPrecOr, out, opts);
  return out;
}

std::string render_query(const QueryAst& q, const RenderOptions& opts) {
  std::string out = "SELECT ";
  for (std::size_t i = 0; i < q.select.size(); ++i) {
    if (i) out += ", ";
    const SelectItem& item = q.select[i];
    if (item.is_star()) {
      if (item.star_qualifier) out += render_identifier(*item.star_qualifier) + ".";
      out += "*";
    } else {
      out += render_expr(*item.expr, opts);
      if (item.alias) out += " AS " + render_identifier(*item.alias);
    }
  }
  if (q.from) out += " FROM " + source_text(*q.from, opts);
  for (const auto& j : q.joins) {
    out += j.kind == JoinKind::Left ? " LEFT JOIN " : " JOIN ";
    out += source_text(j.source, opts) + " ON " + render_expr(j.on, opts);
  }
  if (q.where) out += " WHERE " + render_expr(*q.where, opts);
  if (!q.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < q.group_by.size(); ++i) {
      if (i) out += ", ";
      out += render_expr(q.group_by[i], opts);
    }
  }
  if (!q.order_by.empty()) {
    out += " ORDER BY ";
    for (std::size_t i = 0; i < q.order_by.size(); ++i) {
      if (i) out += ", ";
      out += render_expr(q.order_by[i].expr, opts);
      if (q.order_by[i].descending) out += " DESC";
    }
  }
  if (q.limit) out += " LIMIT " + std::to_string(*q.limit);
  if (q.at_step) {
    out += " AT STEP ";
    if (q.at_step->is_single()) {
      out += std::to_string(q.at_step->single());
    } else {
      const auto& named = q.at_step->named();
      for (std::size_t i = 0; i < named.size(); ++i) {
        if (i) out += ", ";
        out += render_identifier(named[i].name) + "=" + std::to_string(named[i].step);
      }
    }
  }
  return out;
}

std::string render_procedure(const ProcedureAst& proc) {
  std::string out = "CREATE PROCEDURE " + render_identifier(proc.name) + "(";
  for (std::size_t i = 0; i < proc.parameters.size(); ++i) {
    if (i) out += ", ";
    const Parameter& p = proc.parameters[i];
    out += "IN " + render_identifier(p.name) + " " + (p.is_table ? std::string("TABLE") : std::string(type_name(p.type)));
  }
  out += ")\nBEGIN\n";
  render_body(proc.body, 1, out);
  out += "END;\n";
  return out;
}

}  // namespace tardisp
