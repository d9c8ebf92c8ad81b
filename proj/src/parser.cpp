#include "tardisp/parser.hpp"

#include <charconv>
#include <limits>
#include <map>
#include <set>

#include "tardisp/lexer.hpp"

namespace tardisp {

namespace {

std::string describe(const Token& t) {
  switch (t.kind) {
    case TokenKind::End: return "end of input";
    case TokenKind::String: return "'" + t.text + "'";
    case TokenKind::QuotedIdent: return "\"" + t.text + "\"";
    default: return "'" + t.text + "'";
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

  // -------------------------------------------------------------------------
  // token helpers

  const Token& peek(std::size_t k = 0) const { return tokens_[std::min(pos_ + k, tokens_.size() - 1)]; }
  const Token& next() {
    const Token& t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }
  bool at_end() const { return peek().kind == TokenKind::End; }

  static bool is_kw(const Token& t, std::string_view kw) { return t.kind == TokenKind::Ident && iequals(t.text, kw); }
  bool peek_kw(std::string_view kw, std::size_t k = 0) const { return is_kw(peek(k), kw); }
  bool accept_kw(std::string_view kw) {
    if (!peek_kw(kw)) return false;
    next();
    return true;
  }
  void expect_kw(std::string_view kw) {
    if (!accept_kw(kw)) fail(std::string(kw));
  }

  bool peek_sym(std::string_view s, std::size_t k = 0) const {
    return peek(k).kind == TokenKind::Symbol && peek(k).text == s;
  }
  bool accept_sym(std::string_view s) {
    if (!peek_sym(s)) return false;
    next();
    return true;
  }
  void expect_sym(std::string_view s) {
    if (!accept_sym(s)) fail("'" + std::string(s) + "'");
  }

  bool peek_ident(std::size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind == TokenKind::QuotedIdent || (t.kind == TokenKind::Ident && !is_reserved_word(t.text));
  }
  std::string expect_ident(std::string_view what = "identifier") {
    if (!peek_ident()) fail(std::string(what));
    return next().text;
  }

  uint64_t expect_unsigned(std::string_view what) {
    if (peek().kind != TokenKind::Integer) fail(std::string(what));
    const Token& t = next();
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc()) throw Error(ErrorCode::SyntaxError, "integer out of range: " + t.text, t.pos);
    return v;
  }

  [[noreturn]] void fail(const std::string& expected) const {
    const Token& t = peek();
    throw Error(ErrorCode::SyntaxError, "expected " + expected + ", found " + describe(t), t.pos);
  }

  SourcePos here() const { return peek().pos; }
  SourcePos end_of_previous() const {
    const Token& t = tokens_[pos_ == 0 ? 0 : pos_ - 1];
    SourcePos p = t.pos;
    p.col += t.end_offset - t.pos.offset;
    p.offset = t.end_offset;
    return p;
  }

  // -------------------------------------------------------------------------
  // queries

  QueryAst query(bool allow_at_step) {
    QueryAst q;
    expect_kw("SELECT");
    do {
      q.select.push_back(select_item());
    } while (accept_sym(","));
    if (accept_kw("FROM")) {
      q.from = source();
      for (;;) {
        JoinKind kind = JoinKind::Inner;
        if (accept_kw("JOIN")) {
        } else if (peek_kw("INNER") && peek_kw("JOIN", 1)) {
          next();
          next();
        } else if (peek_kw("LEFT")) {
          next();
          accept_kw("OUTER");
          expect_kw("JOIN");
          kind = JoinKind::Left;
        } else {
          break;
        }
        TableSource src = source();
        expect_kw("ON");
        q.joins.push_back(Join{kind, std::move(src), expr()});
      }
    }
    if (accept_kw("WHERE")) q.where = expr();
    if (accept_kw("GROUP")) {
      expect_kw("BY");
      do {
        q.group_by.push_back(expr());
      } while (accept_sym(","));
    }
    if (accept_kw("ORDER")) {
      expect_kw("BY");
      do {
        OrderItem item{expr(), false};
        if (accept_kw("DESC")) {
          item.descending = true;
        } else {
          accept_kw("ASC");
        }
        q.order_by.push_back(std::move(item));
      } while (accept_sym(","));
    }
    if (accept_kw("LIMIT")) q.limit = expect_unsigned("row count");
    if (allow_at_step && peek_kw("AT")) q.at_step = at_step();
    return q;
  }

  AtStepClause at_step() {
    expect_kw("AT");
    if (!peek_kw("STEP")) fail("STEP");
    next();
    if (peek().kind == TokenKind::Integer) return AtStepClause{expect_unsigned("step number")};
    std::vector<NamedStep> named;
    std::set<std::string> seen;
    do {
      SourcePos at = here();
      std::string name = expect_ident("step number or step name");
      if (!seen.insert(name).second) {
        throw Error(ErrorCode::SyntaxError, "step name '" + name + "' bound twice", at);
      }
      expect_sym("=");
      named.push_back(NamedStep{std::move(name), expect_unsigned("step number")});
    } while (accept_sym(","));
    return AtStepClause{std::move(named)};
  }

  SelectItem select_item() {
    SelectItem item;
    if (accept_sym("*")) return item;
    if (peek_ident() && peek_sym(".", 1) && peek_sym("*", 2)) {
      item.star_qualifier = next().text;
      next();
      next();
      return item;
    }
    item.expr = expr();
    if (accept_kw("AS")) {
      item.alias = expect_ident("column alias");
    } else if (peek_ident()) {
      item.alias = next().text;
    }
    return item;
  }

  TableSource source() {
    TableSource src;
    if (accept_sym(":")) {
      src.is_variable = true;
      src.name = expect_ident("variable name");
    } else {
      src.name = expect_ident("table name or :variable");
    }
    if (accept_kw("AS")) {
      src.alias = expect_ident("alias");
    } else if (peek_ident()) {
      src.alias = next().text;
    }
    return src;
  }

  // -------------------------------------------------------------------------
  // expressions

  Expr expr() { return or_expr(); }

  Expr or_expr() {
    Expr lhs = and_expr();
    while (accept_kw("OR")) lhs = make_binary(BinaryOp::Or, std::move(lhs), and_expr());
    return lhs;
  }

  Expr and_expr() {
    Expr lhs = not_expr();
    while (accept_kw("AND")) lhs = make_binary(BinaryOp::And, std::move(lhs), not_expr());
    return lhs;
  }

  Expr not_expr() {
    if (accept_kw("NOT")) return make_unary(UnaryOp::Not, not_expr());
    return comparison();
  }

  Expr comparison() {
    Expr lhs = additive();
    static const std::map<std::string, BinaryOp, std::less<>> kOps = {
        {"=", BinaryOp::Eq}, {"!=", BinaryOp::Ne}, {"<>", BinaryOp::Ne}, {"<", BinaryOp::Lt},
        {"<=", BinaryOp::Le}, {">", BinaryOp::Gt}, {">=", BinaryOp::Ge}};
    if (peek().kind == TokenKind::Symbol) {
      auto it = kOps.find(peek().text);
      if (it != kOps.end()) {
        next();
        return make_binary(it->second, std::move(lhs), additive());
      }
    }
    if (accept_kw("IS")) {
      bool negated = accept_kw("NOT");
      expect_kw("NULL");
      return Expr{IsNullExpr{std::move(lhs), negated}};
    }
    bool negated = false;
    if (peek_kw("NOT") && peek_kw("IN", 1)) {
      next();
      negated = true;
    }
    if (accept_kw("IN")) {
      expect_sym("(");
      std::vector<Expr> items;
      do {
        items.push_back(expr());
      } while (accept_sym(","));
      expect_sym(")");
      return Expr{InListExpr{std::move(lhs), std::move(items), negated}};
    }
    return lhs;
  }

  Expr additive() {
    Expr lhs = multiplicative();
    for (;;) {
      if (accept_sym("+")) {
        lhs = make_binary(BinaryOp::Add, std::move(lhs), multiplicative());
      } else if (accept_sym("-")) {
        lhs = make_binary(BinaryOp::Sub, std::move(lhs), multiplicative());
      } else {
        return lhs;
      }
    }
  }

  Expr multiplicative() {
    Expr lhs = unary();
    for (;;) {
      if (accept_sym("*")) {
        lhs = make_binary(BinaryOp::Mul, std::move(lhs), unary());
      } else if (accept_sym("/")) {
        lhs = make_binary(BinaryOp::Div, std::move(lhs), unary());
      } else if (accept_sym("%")) {
        lhs = make_binary(BinaryOp::Mod, std::move(lhs), unary());
      } else {
        return lhs;
      }
    }
  }

  Expr unary() {
    if (peek_sym("-")) {
      const Token& lit = peek(1);
      if (lit.kind == TokenKind::Integer || lit.kind == TokenKind::Float) {
        next();
        return number(next(), true);
      }
      next();
      return make_unary(UnaryOp::Neg, unary());
    }
    return primary();
  }

  Expr number(const Token& t, bool negative) {
    if (t.kind == TokenKind::Float) {
      double d = 0;
      auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), d);
      if (ec != std::errc()) throw Error(ErrorCode::SyntaxError, "bad number " + t.text, t.pos);
      return make_literal(Value::real(negative ? -d : d));
    }
    uint64_t u = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), u);
    constexpr uint64_t kMax = static_cast<uint64_t>(std::numeric_limits<int64_t>::max());
    if (ec != std::errc() || u > kMax + (negative ? 1 : 0)) {
      throw Error(ErrorCode::SyntaxError, "integer literal out of range: " + t.text, t.pos);
    }
    if (!negative) return make_literal(Value::integer(static_cast<int64_t>(u)));
    if (u == kMax + 1) return make_literal(Value::integer(std::numeric_limits<int64_t>::min()));
    return make_literal(Value::integer(-static_cast<int64_t>(u)));
  }

  Expr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Integer:
      case TokenKind::Float: return number(next(), false);
      case TokenKind::String: return make_literal(Value::text(next().text));
      default: break;
    }
    if (accept_kw("NULL")) return make_literal(Value{});
    if (accept_kw("TRUE")) return make_literal(Value::boolean(true));
    if (accept_kw("FALSE")) return make_literal(Value::boolean(false));
    if (accept_sym(":")) return make_variable(expect_ident("variable name"));
    if (accept_sym("(")) {
      if (peek_kw("SELECT")) {
        throw Error(ErrorCode::SyntaxError, "subqueries are only supported inside EXISTS", here());
      }
      Expr e = expr();
      expect_sym(")");
      return e;
    }
    if (accept_kw("EXISTS")) {
      expect_sym("(");
      QueryAst sub = query(false);
      expect_sym(")");
      return Expr{ExistsExpr{std::move(sub)}};
    }
    if (accept_kw("CASE")) {
      CaseExpr c;
      while (accept_kw("WHEN")) {
        Expr cond = expr();
        expect_kw("THEN");
        c.whens.emplace_back(std::move(cond), expr());
      }
      if (c.whens.empty()) fail("WHEN");
      if (accept_kw("ELSE")) c.otherwise = Box<Expr>(expr());
      expect_kw("END");
      return Expr{std::move(c)};
    }
    if (accept_kw("COALESCE")) {
      expect_sym("(");
      CoalesceExpr c;
      do {
        c.args.push_back(expr());
      } while (accept_sym(","));
      expect_sym(")");
      return Expr{std::move(c)};
    }
    static const std::map<std::string, AggregateFunc, std::less<>> kAggs = {
        {"SUM", AggregateFunc::Sum}, {"COUNT", AggregateFunc::Count}, {"MIN", AggregateFunc::Min},
        {"MAX", AggregateFunc::Max}, {"AVG", AggregateFunc::Avg}};
    for (const auto& [name, func] : kAggs) {
      if (peek_kw(name) && peek_sym("(", 1)) {
        next();
        next();
        AggregateExpr agg{func, std::nullopt};
        if (func == AggregateFunc::Count && accept_sym("*")) {
        } else {
          agg.arg = Box<Expr>(expr());
        }
        expect_sym(")");
        return Expr{std::move(agg)};
      }
    }
    if (peek_ident()) {
      if (peek_sym("!", 1)) {
        std::string step_name = next().text;
        next();
        return Expr{QualifiedColumnRef{std::move(step_name), column_ref()}};
      }
      if (peek_sym("(", 1)) {
        throw Error(ErrorCode::SyntaxError, "unknown function '" + peek().text + "'", peek().pos);
      }
      return Expr{column_ref()};
    }
    fail("expression");
  }

  ColumnRef column_ref() {
    std::string first = expect_ident("column name");
    if (accept_sym(".")) return ColumnRef{std::move(first), expect_ident("column name")};
    return ColumnRef{std::nullopt, std::move(first)};
  }

  // -------------------------------------------------------------------------
  // procedures

  ProcedureAst procedure() {
    ProcedureAst proc;
    accept_kw("CREATE");
    expect_kw("PROCEDURE");
    proc.name = expect_ident("procedure name");
    expect_sym("(");
    if (!peek_sym(")")) {
      do {
        proc.parameters.push_back(parameter());
      } while (accept_sym(","));
    }
    expect_sym(")");
    accept_kw("AS");
    expect_kw("BEGIN");
    for (const auto& p : proc.parameters) declare(p.name, p.is_table, here());
    proc.body = statements({"END"});
    expect_kw("END");
    accept_sym(";");
    if (!at_end()) fail("end of input");
    return proc;
  }

  Parameter parameter() {
    Parameter p;
    accept_kw("IN");
    p.name = expect_ident("parameter name");
    if (peek_kw("TABLE")) {
      next();
      p.is_table = true;
      if (accept_sym("(")) {
        // Column list is informative only; table arguments carry their own schema.
        do {
          expect_ident("column name");
          type_name_token();
        } while (accept_sym(","));
        expect_sym(")");
      }
    } else {
      p.type = type_name_token();
    }
    return p;
  }

  Type type_name_token() {
    const Token& t = peek();
    if (t.kind != TokenKind::Ident) fail("type name");
    auto type = parse_type_name(t.text);
    if (!type) fail("type name");
    next();
    if (accept_sym("(")) {  // VARCHAR(100) and friends
      expect_unsigned("length");
      if (accept_sym(",")) expect_unsigned("scale");
      expect_sym(")");
    }
    return *type;
  }

  std::vector<Statement> statements(std::initializer_list<std::string_view> terminators) {
    std::vector<Statement> out;
    for (;;) {
      for (auto term : terminators) {
        if (peek_kw(term)) return out;
      }
      if (at_end()) fail("statement or END");
      out.push_back(statement());
    }
  }

  Statement statement() {
    Statement s;
    s.id = ++next_statement_id_;
    s.span.begin = here();
    if (accept_kw("DECLARE")) {
      SourcePos at = here();
      std::string name = expect_ident("variable name");
      if (peek_kw("TABLE")) {
        next();
        declare(name, true, at);
        s.node = DeclareTable{std::move(name)};
      } else {
        DeclareScalar d{name, type_name_token(), std::nullopt};
        if (accept_sym("=") || accept_sym(":=") || accept_kw("DEFAULT")) d.init = scalar_expr();
        declare(name, false, at);
        s.node = std::move(d);
      }
    } else if (accept_kw("IF")) {
      IfStmt st{scalar_expr(), {}, {}};
      expect_kw("THEN");
      st.then_body = statements({"ELSE", "END"});
      if (accept_kw("ELSE")) st.else_body = statements({"END"});
      expect_kw("END");
      expect_kw("IF");
      s.node = std::move(st);
    } else if (accept_kw("WHILE")) {
      WhileStmt st{scalar_expr(), {}};
      expect_kw("DO");
      st.body = statements({"END"});
      expect_kw("END");
      expect_kw("WHILE");
      s.node = std::move(st);
    } else if (accept_kw("INSERT")) {
      s.node = insert_stmt();
    } else if (accept_kw("UPDATE")) {
      s.node = update_stmt();
    } else if (accept_kw("DELETE")) {
      expect_kw("FROM");
      DeleteStmt st{expect_ident("table name"), std::nullopt};
      if (accept_kw("WHERE")) st.where = row_expr();
      s.node = std::move(st);
    } else if (peek_ident() && (peek_sym("=", 1) || peek_sym(":=", 1))) {
      SourcePos at = here();
      std::string name = next().text;
      next();
      auto kind = lookup(name, at);
      if (peek_kw("SELECT")) {
        QueryAst q = proc_query();
        if (kind) {
          s.node = AssignTable{std::move(name), std::move(q)};
        } else {
          s.node = AssignScalar{std::move(name), std::move(q)};
        }
      } else {
        if (kind) throw Error(ErrorCode::InvalidQuery, "table variable '" + name + "' needs a SELECT", at);
        s.node = AssignScalar{std::move(name), scalar_expr()};
      }
    } else {
      fail("statement");
    }
    expect_sym(";");
    s.span.end = end_of_previous();
    return s;
  }

  InsertStmt insert_stmt() {
    expect_kw("INTO");
    InsertStmt st;
    st.table = expect_ident("table name");
    if (accept_sym("(")) {
      do {
        st.columns.push_back(expect_ident("column name"));
      } while (accept_sym(","));
      expect_sym(")");
    }
    if (accept_kw("VALUES")) {
      std::vector<std::vector<Expr>> rows;
      do {
        expect_sym("(");
        std::vector<Expr> row;
        do {
          row.push_back(scalar_expr());
        } while (accept_sym(","));
        expect_sym(")");
        rows.push_back(std::move(row));
      } while (accept_sym(","));
      st.source = std::move(rows);
    } else if (peek_kw("SELECT")) {
      st.source = proc_query();
    } else {
      fail("VALUES or SELECT");
    }
    return st;
  }

  UpdateStmt update_stmt() {
    UpdateStmt st;
    st.table = expect_ident("table name");
    expect_kw("SET");
    do {
      std::string col = expect_ident("column name");
      expect_sym("=");
      st.assignments.emplace_back(std::move(col), row_expr());
    } while (accept_sym(","));
    if (accept_kw("WHERE")) st.where = row_expr();
    return st;
  }

  QueryAst proc_query() {
    SourcePos at = here();
    QueryAst q = query(false);
    if (peek_kw("AT")) throw Error(ErrorCode::InvalidQuery, "AT STEP is not allowed inside a procedure", here());
    try {
      validate_query(q);
    } catch (Error& e) {
      if (!e.pos()) e.set_pos(at);
      throw;
    }
    check_query_variables(q, at);
    return q;
  }

  // Expression evaluated against a table row (UPDATE/DELETE): bare names are
  // columns, :names are variables.
  Expr row_expr() {
    SourcePos at = here();
    Expr e = expr();
    check_row_expr(e, at);
    return e;
  }

  // Expression outside any query: bare names are variables.
  Expr scalar_expr() {
    SourcePos at = here();
    Expr e = expr();
    to_scalar_context(e, at);
    return e;
  }

  void to_scalar_context(Expr& e, SourcePos at) {
    std::visit(
        [&](auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, ColumnRef>) {
            if (node.qualifier) {
              throw Error(ErrorCode::InvalidQuery,
                          "column reference " + *node.qualifier + "." + node.column + " outside a query", at);
            }
            std::string name = node.column;
            e = make_variable(std::move(name));
            to_scalar_context(e, at);
          } else if constexpr (std::is_same_v<T, VariableRef>) {
            auto kind = lookup(node.name, at);
            if (kind) throw Error(ErrorCode::InvalidQuery, "table variable '" + node.name + "' used as a scalar", at);
          } else if constexpr (std::is_same_v<T, QualifiedColumnRef>) {
            throw Error(ErrorCode::InvalidQuery, "time qualifiers are only allowed in console queries", at);
          } else if constexpr (std::is_same_v<T, AggregateExpr>) {
            throw Error(ErrorCode::InvalidQuery, "aggregate outside a query", at);
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            to_scalar_context(*node.operand, at);
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            to_scalar_context(*node.lhs, at);
            to_scalar_context(*node.rhs, at);
          } else if constexpr (std::is_same_v<T, IsNullExpr>) {
            to_scalar_context(*node.operand, at);
          } else if constexpr (std::is_same_v<T, InListExpr>) {
            to_scalar_context(*node.operand, at);
            for (auto& i : node.items) to_scalar_context(i, at);
          } else if constexpr (std::is_same_v<T, CaseExpr>) {
            for (auto& [c, v] : node.whens) {
              to_scalar_context(c, at);
              to_scalar_context(v, at);
            }
            if (node.otherwise) to_scalar_context(**node.otherwise, at);
          } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
            for (auto& a : node.args) to_scalar_context(a, at);
          } else if constexpr (std::is_same_v<T, ExistsExpr>) {
            validate_query(*node.query);
            check_query_variables(*node.query, at);
          }
        },
        e.node);
  }

  void check_row_expr(const Expr& e, SourcePos at) {
    visit_expr(e, [&](const Expr& x) {
      if (x.is<QualifiedColumnRef>()) {
        throw Error(ErrorCode::InvalidQuery, "time qualifiers are only allowed in console queries", at);
      }
      if (x.is<AggregateExpr>()) throw Error(ErrorCode::InvalidQuery, "aggregate outside a query", at);
      if (x.is<ExistsExpr>()) {
        validate_query(*x.as<ExistsExpr>().query);
        check_query_variables(*x.as<ExistsExpr>().query, at);
      }
      if (x.is<VariableRef>() && lookup(x.as<VariableRef>().name, at)) {
        throw Error(ErrorCode::InvalidQuery, "table variable '" + x.as<VariableRef>().name + "' used as a scalar", at);
      }
    });
  }

  void check_query_variables(const QueryAst& q, SourcePos at) {
    auto check_source = [&](const TableSource& src) {
      if (src.is_variable && !lookup(src.name, at)) {
        throw Error(ErrorCode::InvalidQuery, "scalar variable '" + src.name + "' used as a table", at);
      }
    };
    if (q.from) check_source(*q.from);
    for (const auto& j : q.joins) check_source(j.source);
    visit_query_exprs(q, [&](const Expr& x) {
      if (x.is<QualifiedColumnRef>()) {
        throw Error(ErrorCode::InvalidQuery, "time qualifiers are only allowed in console queries", at);
      }
      if (x.is<VariableRef>() && lookup(x.as<VariableRef>().name, at)) {
        throw Error(ErrorCode::InvalidQuery, "table variable '" + x.as<VariableRef>().name + "' used as a scalar", at);
      }
      if (x.is<ExistsExpr>()) check_query_variables(*x.as<ExistsExpr>().query, at);
    });
  }

  void declare(const std::string& name, bool is_table, SourcePos at) {
    if (!variables_.emplace(name, is_table).second) {
      throw Error(ErrorCode::InvalidQuery, "variable '" + name + "' declared twice", at);
    }
  }

  // Returns true for table variables; throws for undeclared names.
  bool lookup(const std::string& name, SourcePos at) const {
    auto it = variables_.find(name);
    if (it == variables_.end()) throw Error(ErrorCode::UndeclaredVariable, "undeclared variable '" + name + "'", at);
    return it->second;
  }

  // -------------------------------------------------------------------------
  // DDL

  std::vector<TableDef> ddl() {
    std::vector<TableDef> out;
    while (!at_end()) {
      if (accept_sym(";")) continue;
      expect_kw("CREATE");
      if (!peek_kw("TABLE")) fail("TABLE");
      next();
      TableDef def;
      def.name = expect_ident("table name");
      expect_sym("(");
      do {
        if (peek_kw("PRIMARY") && peek_kw("KEY", 1)) {
          next();
          next();
          expect_sym("(");
          do {
            def.primary_key.push_back(expect_ident("column name"));
          } while (accept_sym(","));
          expect_sym(")");
          continue;
        }
        ColumnDef col;
        col.name = expect_ident("column name");
        col.type = type_name_token();
        if (peek_kw("PRIMARY") && peek_kw("KEY", 1)) {
          next();
          next();
          def.primary_key.push_back(col.name);
        } else if (peek_kw("NOT") && peek_kw("NULL", 1)) {
          next();
          next();
        }
        def.columns.push_back(std::move(col));
      } while (accept_sym(","));
      expect_sym(")");
      if (!at_end()) expect_sym(";");
      out.push_back(std::move(def));
    }
    return out;
  }

 private:
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  StatementId next_statement_id_ = 0;
  std::map<std::string, bool> variables_;
};

bool contains_aggregate(const Expr& e) {
  bool found = false;
  visit_expr(e, [&](const Expr& x) {
    if (x.is<AggregateExpr>()) found = true;
  });
  return found;
}

// Checks column references outside aggregates against the grouping columns.
void check_grouped(const Expr& e, const std::vector<Expr>& group_by, const char* where) {
  if (e.is<AggregateExpr>()) return;
  if (e.is<ColumnRef>() || e.is<QualifiedColumnRef>()) {
    const ColumnRef& ref = e.is<ColumnRef>() ? e.as<ColumnRef>() : e.as<QualifiedColumnRef>().column;
    for (const auto& g : group_by) {
      if (g.is<ColumnRef>() && g.as<ColumnRef>() == ref) return;
    }
    std::string name = ref.qualifier ? *ref.qualifier + "." + ref.column : ref.column;
    throw Error(ErrorCode::InvalidQuery, std::string(where) + " references " + name + " which is not grouped");
  }
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, UnaryExpr>) {
          check_grouped(*node.operand, group_by, where);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          check_grouped(*node.lhs, group_by, where);
          check_grouped(*node.rhs, group_by, where);
        } else if constexpr (std::is_same_v<T, IsNullExpr>) {
          check_grouped(*node.operand, group_by, where);
        } else if constexpr (std::is_same_v<T, InListExpr>) {
          check_grouped(*node.operand, group_by, where);
          for (const auto& i : node.items) check_grouped(i, group_by, where);
        } else if constexpr (std::is_same_v<T, CaseExpr>) {
          for (const auto& [c, v] : node.whens) {
            check_grouped(c, group_by, where);
            check_grouped(v, group_by, where);
          }
          if (node.otherwise) check_grouped(**node.otherwise, group_by, where);
        } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
          for (const auto& a : node.args) check_grouped(a, group_by, where);
        }
      },
      e.node);
}

void check_no_nested_aggregates(const Expr& e) {
  visit_expr(e, [](const Expr& x) {
    if (x.is<AggregateExpr>() && x.as<AggregateExpr>().arg && contains_aggregate(**x.as<AggregateExpr>().arg)) {
      throw Error(ErrorCode::InvalidQuery, "aggregates cannot be nested");
    }
  });
}

}  // namespace

void validate_query(const QueryAst& q) {
  auto no_aggregate = [](const Expr& e, const char* where) {
    if (contains_aggregate(e)) throw Error(ErrorCode::InvalidQuery, std::string("aggregate not allowed in ") + where);
  };
  if (q.where) no_aggregate(*q.where, "WHERE");
  for (const auto& j : q.joins) no_aggregate(j.on, "ON");
  for (const auto& g : q.group_by) {
    if (!g.is<ColumnRef>()) throw Error(ErrorCode::InvalidQuery, "GROUP BY items must be column references");
  }
  bool aggregated = !q.group_by.empty();
  for (const auto& item : q.select) {
    if (item.expr) {
      check_no_nested_aggregates(*item.expr);
      aggregated = aggregated || contains_aggregate(*item.expr);
    }
  }
  for (const auto& o : q.order_by) {
    check_no_nested_aggregates(o.expr);
    aggregated = aggregated || contains_aggregate(o.expr);
  }
  if (aggregated) {
    for (const auto& item : q.select) {
      if (item.is_star()) throw Error(ErrorCode::InvalidQuery, "* cannot be combined with grouping");
      check_grouped(*item.expr, q.group_by, "select list");
    }
    for (const auto& o : q.order_by) {
      bool is_alias = false;
      if (o.expr.is<ColumnRef>() && !o.expr.as<ColumnRef>().qualifier) {
        for (const auto& item : q.select) is_alias = is_alias || item.alias == o.expr.as<ColumnRef>().column;
      }
      if (!is_alias) check_grouped(o.expr, q.group_by, "ORDER BY");
    }
  }
  visit_query_exprs(q, [](const Expr& x) {
    if (x.is<ExistsExpr>()) {
      const QueryAst& sub = *x.as<ExistsExpr>().query;
      if (sub.at_step) throw Error(ErrorCode::InvalidQuery, "AT STEP is not allowed in a subquery");
      validate_query(sub);
    }
  });
}

QueryAst parse_query(std::string_view text) {
  Parser p(text);
  SourcePos start = p.here();
  QueryAst q = p.query(true);
  p.accept_sym(";");
  if (!p.at_end()) p.fail("end of query");
  try {
    validate_query(q);
  } catch (Error& e) {
    if (!e.pos()) e.set_pos(start);
    throw;
  }
  return q;
}

Expr parse_expression(std::string_view text) {
  Parser p(text);
  Expr e = p.expr();
  if (!p.at_end()) p.fail("end of expression");
  return e;
}

ProcedureAst parse_procedure(std::string_view text) {
  Parser p(text);
  return p.procedure();
}

std::vector<TableDef> parse_ddl(std::string_view text) {
  Parser p(text);
  return p.ddl();
}

}  // namespace tardisp
