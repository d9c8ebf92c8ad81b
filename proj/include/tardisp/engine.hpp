#pragma once

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "tardisp/ast.hpp"
#include "tardisp/relation.hpp"
#include "tardisp/storage.hpp"

namespace tardisp {

using TableBinding = std::shared_ptr<const Relation>;
using Binding = std::variant<Value, TableBinding>;

/// Variable name -> scalar value or table. Tables are shared immutable
/// snapshots, so copying an Environment is cheap.
class Environment {
 public:
  void set_scalar(const std::string& name, Value v) { vars_[name] = std::move(v); }
  void set_table(const std::string& name, TableBinding t) { vars_[name] = std::move(t); }
  void set_table(const std::string& name, Relation r) { vars_[name] = std::make_shared<const Relation>(std::move(r)); }
  void erase(const std::string& name) { vars_.erase(name); }

  bool contains(const std::string& name) const { return vars_.count(name) != 0; }
  const Binding* find(const std::string& name) const;

  /// Throw UnboundVariable when missing, TypeMismatch on the wrong kind.
  const Value& scalar(const std::string& name) const;
  const TableBinding& table(const std::string& name) const;

  const std::map<std::string, Binding>& bindings() const { return vars_; }
  std::size_t size() const { return vars_.size(); }

  /// Deep equality: scalars exactly, tables by Relation equality.
  friend bool operator==(const Environment& a, const Environment& b);

 private:
  std::map<std::string, Binding> vars_;
};

bool binding_equal(const Binding& a, const Binding& b);

/// Evaluates a query (no AT STEP, no time qualifiers) reading base tables as
/// of `at` and `:vars` from `env`. Rows come out sorted by ORDER BY (ties by
/// the whole output row) or, without ORDER BY, by the output row.
Relation evaluate(const QueryAst& q, const Environment& env, const Database& db, LogicalTime at);

/// Scalar expression without aggregates; bare column references are errors
/// (there is no row). EXISTS subqueries read the database as of `at`.
Value evaluate_scalar(const Expr& e, const Environment& env, const Database& db, LogicalTime at);

/// Advances the clock once, then applies the INSERT/UPDATE/DELETE at the new
/// time. Caller holds the writer slot. Returns the affected row count.
std::size_t execute_dml(const Statement& stmt, const Environment& env, Database& db);

/// Name an unaliased select expression gets in the output.
std::string output_column_name(const Expr& e);

/// Resolve `ref` against the columns of a single relation using the same
/// rules as queries (exact name, then unique ".name" suffix).
std::optional<std::size_t> resolve_in_relation(const Relation& rel, const ColumnRef& ref);

}  // namespace tardisp
