#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tardisp/error.hpp"
#include "tardisp/value.hpp"

namespace tardisp {

/// Heap-allocated value with deep copy and deep equality, for recursive AST
/// nodes.
template <class T>
class Box {
 public:
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}  // NOLINT: implicit by design of AST builders
  Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;

  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

 private:
  std::unique_ptr<T> ptr_;
};

struct Expr;
struct QueryAst;

/// `alias.column` or bare `column`.
struct ColumnRef {
  std::optional<std::string> qualifier;
  std::string column;

  friend bool operator==(const ColumnRef&, const ColumnRef&) = default;
};

/// `name!alias.column`: the column's value at the step bound to `name`.
struct QualifiedColumnRef {
  std::string step_name;
  ColumnRef column;

  friend bool operator==(const QualifiedColumnRef&, const QualifiedColumnRef&) = default;
};

/// `:name`
struct VariableRef {
  std::string name;

  friend bool operator==(const VariableRef&, const VariableRef&) = default;
};

struct Literal {
  Value value;

  friend bool operator==(const Literal&, const Literal&) = default;
};

enum class UnaryOp { Neg, Not };

enum class BinaryOp { Add, Sub, Mul, Div, Mod, Eq, Ne, Lt, Le, Gt, Ge, And, Or };

struct UnaryExpr {
  UnaryOp op;
  Box<Expr> operand;

  friend bool operator==(const UnaryExpr&, const UnaryExpr&) = default;
};

struct BinaryExpr {
  BinaryOp op;
  Box<Expr> lhs;
  Box<Expr> rhs;

  friend bool operator==(const BinaryExpr&, const BinaryExpr&) = default;
};

struct IsNullExpr {
  Box<Expr> operand;
  bool negated = false;

  friend bool operator==(const IsNullExpr&, const IsNullExpr&) = default;
};

struct InListExpr {
  Box<Expr> operand;
  std::vector<Expr> items;
  bool negated = false;

  friend bool operator==(const InListExpr&, const InListExpr&);
};

enum class AggregateFunc { Sum, Count, Min, Max, Avg };

/// Aggregate call. `arg` absent means COUNT(*).
struct AggregateExpr {
  AggregateFunc func;
  std::optional<Box<Expr>> arg;

  friend bool operator==(const AggregateExpr&, const AggregateExpr&) = default;
};

struct ExistsExpr {
  Box<QueryAst> query;

  friend bool operator==(const ExistsExpr&, const ExistsExpr&);
};

struct CaseExpr {
  std::vector<std::pair<Expr, Expr>> whens;
  std::optional<Box<Expr>> otherwise;

  friend bool operator==(const CaseExpr&, const CaseExpr&);
};

/// COALESCE(a, b, ...)
struct CoalesceExpr {
  std::vector<Expr> args;

  friend bool operator==(const CoalesceExpr&, const CoalesceExpr&);
};

struct Expr {
  using Node = std::variant<Literal, ColumnRef, QualifiedColumnRef, VariableRef, UnaryExpr, BinaryExpr, IsNullExpr,
                            InListExpr, AggregateExpr, ExistsExpr, CaseExpr, CoalesceExpr>;
  Node node;

  template <class T>
  bool is() const { return std::holds_alternative<T>(node); }
  template <class T>
  const T& as() const { return std::get<T>(node); }
  template <class T>
  T& as() { return std::get<T>(node); }

  friend bool operator==(const Expr&, const Expr&) = default;
};

inline bool operator==(const InListExpr& a, const InListExpr& b) {
  return a.operand == b.operand && a.items == b.items && a.negated == b.negated;
}
inline bool operator==(const CaseExpr& a, const CaseExpr& b) {
  return a.whens == b.whens && a.otherwise == b.otherwise;
}
inline bool operator==(const CoalesceExpr& a, const CoalesceExpr& b) { return a.args == b.args; }

// Convenience builders, mostly for tests and rewrites.
Expr make_literal(Value v);
Expr make_column(std::string qualifier, std::string column);
Expr make_column(std::string column);
Expr make_variable(std::string name);
Expr make_binary(BinaryOp op, Expr lhs, Expr rhs);
Expr make_unary(UnaryOp op, Expr operand);

struct SelectItem {
  // Absent expr means `*` (or `qualifier.*` when star_qualifier is set).
  std::optional<Expr> expr;
  std::optional<std::string> star_qualifier;
  std::optional<std::string> alias;

  bool is_star() const { return !expr.has_value(); }

  friend bool operator==(const SelectItem&, const SelectItem&) = default;
};

struct TableSource {
  // Exactly one of table / variable is meaningful: variable set means `:name`.
  std::string name;
  bool is_variable = false;
  std::optional<std::string> alias;

  /// Name used to qualify columns from this source.
  const std::string& binding_name() const { return alias ? *alias : name; }

  friend bool operator==(const TableSource&, const TableSource&) = default;
};

enum class JoinKind { Inner, Left };

struct Join {
  JoinKind kind = JoinKind::Inner;
  TableSource source;
  Expr on;

  friend bool operator==(const Join&, const Join&) = default;
};

struct OrderItem {
  Expr expr;
  bool descending = false;

  friend bool operator==(const OrderItem&, const OrderItem&) = default;
};

struct NamedStep {
  std::string name;
  uint64_t step = 0;

  friend bool operator==(const NamedStep&, const NamedStep&) = default;
};

/// `AT STEP <n>` or `AT STEP a=<n>, b=<m>, ...`.
struct AtStepClause {
  std::variant<uint64_t, std::vector<NamedStep>> steps;

  bool is_single() const { return std::holds_alternative<uint64_t>(steps); }
  uint64_t single() const { return std::get<uint64_t>(steps); }
  const std::vector<NamedStep>& named() const { return std::get<std::vector<NamedStep>>(steps); }

  friend bool operator==(const AtStepClause&, const AtStepClause&) = default;
};

struct QueryAst {
  std::vector<SelectItem> select;
  std::optional<TableSource> from;
  std::vector<Join> joins;
  std::optional<Expr> where;
  std::vector<Expr> group_by;
  std::vector<OrderItem> order_by;
  std::optional<uint64_t> limit;
  std::optional<AtStepClause> at_step;

  friend bool operator==(const QueryAst&, const QueryAst&) = default;
};

inline bool operator==(const ExistsExpr& a, const ExistsExpr& b) { return a.query == b.query; }

// ---------------------------------------------------------------------------
// Procedures

struct SourceSpan {
  SourcePos begin;
  SourcePos end;

  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

using StatementId = uint32_t;

struct Statement;

struct DeclareScalar {
  std::string name;
  Type type = Type::Int;
  std::optional<Expr> init;

  friend bool operator==(const DeclareScalar&, const DeclareScalar&) = default;
};

struct DeclareTable {
  std::string name;

  friend bool operator==(const DeclareTable&, const DeclareTable&) = default;
};

/// `x = expr;` or `x = SELECT ...;` (single cell) for a scalar variable.
struct AssignScalar {
  std::string name;
  std::variant<Expr, QueryAst> value;

  friend bool operator==(const AssignScalar&, const AssignScalar&) = default;
};

/// `t = SELECT ...;` for a table variable.
struct AssignTable {
  std::string name;
  QueryAst query;

  friend bool operator==(const AssignTable&, const AssignTable&) = default;
};

struct IfStmt {
  Expr condition;
  std::vector<Statement> then_body;
  std::vector<Statement> else_body;

  friend bool operator==(const IfStmt&, const IfStmt&);
};

struct WhileStmt {
  Expr condition;
  std::vector<Statement> body;

  friend bool operator==(const WhileStmt&, const WhileStmt&);
};

struct InsertStmt {
  std::string table;
  std::vector<std::string> columns;  // empty = all, in table order
  std::variant<std::vector<std::vector<Expr>>, QueryAst> source;

  friend bool operator==(const InsertStmt&, const InsertStmt&) = default;
};

struct UpdateStmt {
  std::string table;
  std::vector<std::pair<std::string, Expr>> assignments;
  std::optional<Expr> where;

  friend bool operator==(const UpdateStmt&, const UpdateStmt&) = default;
};

struct DeleteStmt {
  std::string table;
  std::optional<Expr> where;

  friend bool operator==(const DeleteStmt&, const DeleteStmt&) = default;
};

/// Inserted by instrumentation after each traced instruction: persists the
/// runtime's record of the step that just executed.
struct TraceRecordStmt {
  StatementId traced = 0;

  friend bool operator==(const TraceRecordStmt&, const TraceRecordStmt&) = default;
};

struct Statement {
  using Node = std::variant<DeclareScalar, DeclareTable, AssignScalar, AssignTable, IfStmt, WhileStmt, InsertStmt,
                            UpdateStmt, DeleteStmt, TraceRecordStmt>;
  StatementId id = 0;
  SourceSpan span;
  Node node;

  template <class T>
  bool is() const { return std::holds_alternative<T>(node); }
  template <class T>
  const T& as() const { return std::get<T>(node); }

  bool is_dml() const { return is<InsertStmt>() || is<UpdateStmt>() || is<DeleteStmt>(); }

  friend bool operator==(const Statement&, const Statement&) = default;
};

inline bool operator==(const IfStmt& a, const IfStmt& b) {
  return a.condition == b.condition && a.then_body == b.then_body && a.else_body == b.else_body;
}
inline bool operator==(const WhileStmt& a, const WhileStmt& b) {
  return a.condition == b.condition && a.body == b.body;
}

struct Parameter {
  std::string name;
  bool is_table = false;
  Type type = Type::Int;  // scalar parameters only

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

struct ProcedureAst {
  std::string name;
  std::vector<Parameter> parameters;
  std::vector<Statement> body;

  /// Declared variables (parameters first, then DECLAREs in source order)
  /// with their kind: true for table variables.
  std::vector<std::pair<std::string, bool>> variables() const;

  /// Pre-order lookup by statement id.
  const Statement* find_statement(StatementId id) const;

  friend bool operator==(const ProcedureAst&, const ProcedureAst&) = default;
};

/// Visits every statement in pre-order, descending into IF/WHILE bodies.
template <class F>
void for_each_statement(const std::vector<Statement>& body, F&& f) {
  for (const auto& s : body) {
    f(s);
    if (s.is<IfStmt>()) {
      for_each_statement(s.as<IfStmt>().then_body, f);
      for_each_statement(s.as<IfStmt>().else_body, f);
    } else if (s.is<WhileStmt>()) {
      for_each_statement(s.as<WhileStmt>().body, f);
    }
  }
}

/// Visits an expression tree. Does not descend into EXISTS subqueries unless
/// `into_subqueries` is set.
void visit_expr(const Expr& e, const std::function<void(const Expr&)>& f, bool into_subqueries = false);
void visit_query_exprs(const QueryAst& q, const std::function<void(const Expr&)>& f, bool into_subqueries = false);

/// Variables referenced by a query, in first-use order, including EXISTS
/// subqueries and FROM/JOIN sources.
std::vector<std::string> referenced_variables(const QueryAst& q);

}  // namespace tardisp
