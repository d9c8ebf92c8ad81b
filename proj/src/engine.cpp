#include "tardisp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "tardisp/render.hpp"

namespace tardisp {

// ---------------------------------------------------------------------------
// Environment

const Binding* Environment::find(const std::string& name) const {
  auto it = vars_.find(name);
  return it == vars_.end() ? nullptr : &it->second;
}

const Value& Environment::scalar(const std::string& name) const {
  const Binding* b = find(name);
  if (!b) throw Error(ErrorCode::UnboundVariable, "variable '" + name + "' is not bound");
  if (!std::holds_alternative<Value>(*b)) {
    throw Error(ErrorCode::TypeMismatch, "variable '" + name + "' is a table, not a scalar");
  }
  return std::get<Value>(*b);
}

const TableBinding& Environment::table(const std::string& name) const {
  const Binding* b = find(name);
  if (!b) throw Error(ErrorCode::UnboundVariable, "variable '" + name + "' is not bound");
  if (!std::holds_alternative<TableBinding>(*b)) {
    throw Error(ErrorCode::TypeMismatch, "variable '" + name + "' is a scalar, not a table");
  }
  return std::get<TableBinding>(*b);
}

bool binding_equal(const Binding& a, const Binding& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<Value>(a)) return std::get<Value>(a) == std::get<Value>(b);
  const auto& ta = std::get<TableBinding>(a);
  const auto& tb = std::get<TableBinding>(b);
  if (ta == tb) return true;
  if (!ta || !tb) return false;
  return *ta == *tb;
}

bool operator==(const Environment& a, const Environment& b) {
  if (a.vars_.size() != b.vars_.size()) return false;
  for (auto ia = a.vars_.begin(), ib = b.vars_.begin(); ia != a.vars_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !binding_equal(ia->second, ib->second)) return false;
  }
  return true;
}

std::string output_column_name(const Expr& e) {
  if (e.is<ColumnRef>()) {
    const auto& c = e.as<ColumnRef>();
    return c.qualifier ? *c.qualifier + "." + c.column : c.column;
  }
  return render_expr(e);
}

namespace {

// ---------------------------------------------------------------------------
// Scalar semantics

bool truth(const Value& v, const char* where) {
  if (v.is_null()) return false;
  if (v.type() != Type::Bool) {
    throw Error(ErrorCode::TypeMismatch, std::string(where) + " must be boolean, got " + std::string(type_name(v.type())));
  }
  return v.as_bool();
}

// NULL, true or false under three-valued logic.
std::optional<bool> logical(const Value& v) {
  if (v.is_null()) return std::nullopt;
  if (v.type() != Type::Bool) {
    throw Error(ErrorCode::TypeMismatch, "expected boolean, got " + std::string(type_name(v.type())));
  }
  return v.as_bool();
}

Value checked_float(double d) {
  if (!std::isfinite(d)) throw Error(ErrorCode::NumericOverflow, "floating point overflow");
  return Value::real(d);
}

Value arithmetic(BinaryOp op, const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return Value{};
  if (!a.is_numeric() || !b.is_numeric()) {
    throw Error(ErrorCode::TypeMismatch, "arithmetic on " + std::string(type_name(a.type())) + " and " +
                                             std::string(type_name(b.type())));
  }
  if (a.type() == Type::Int && b.type() == Type::Int) {
    int64_t x = a.as_int();
    int64_t y = b.as_int();
    int64_t r = 0;
    switch (op) {
      case BinaryOp::Add:
        if (__builtin_add_overflow(x, y, &r)) throw Error(ErrorCode::NumericOverflow, "integer overflow in +");
        return Value::integer(r);
      case BinaryOp::Sub:
        if (__builtin_sub_overflow(x, y, &r)) throw Error(ErrorCode::NumericOverflow, "integer overflow in -");
        return Value::integer(r);
      case BinaryOp::Mul:
        if (__builtin_mul_overflow(x, y, &r)) throw Error(ErrorCode::NumericOverflow, "integer overflow in *");
        return Value::integer(r);
      case BinaryOp::Div:
        if (y == 0) throw Error(ErrorCode::DivisionByZero, "division by zero");
        if (x == std::numeric_limits<int64_t>::min() && y == -1) {
          throw Error(ErrorCode::NumericOverflow, "integer overflow in /");
        }
        return Value::integer(x / y);
      case BinaryOp::Mod:
        if (y == 0) throw Error(ErrorCode::DivisionByZero, "division by zero");
        if (y == -1) return Value::integer(0);
        return Value::integer(x % y);
      default: break;
    }
  }
  double x = a.to_double();
  double y = b.to_double();
  switch (op) {
    case BinaryOp::Add: return checked_float(x + y);
    case BinaryOp::Sub: return checked_float(x - y);
    case BinaryOp::Mul: return checked_float(x * y);
    case BinaryOp::Div:
      if (y == 0) throw Error(ErrorCode::DivisionByZero, "division by zero");
      return checked_float(x / y);
    case BinaryOp::Mod:
      if (y == 0) throw Error(ErrorCode::DivisionByZero, "division by zero");
      return checked_float(std::fmod(x, y));
    default: break;
  }
  throw Error(ErrorCode::InvalidQuery, "not an arithmetic operator");
}

Value binary(BinaryOp op, const Value& a, const Value& b) {
  switch (op) {
    case BinaryOp::Add:
    case BinaryOp::Sub:
    case BinaryOp::Mul:
    case BinaryOp::Div:
    case BinaryOp::Mod: return arithmetic(op, a, b);
    case BinaryOp::And: {
      auto x = logical(a);
      auto y = logical(b);
      if ((x && !*x) || (y && !*y)) return Value::boolean(false);
      if (x && y) return Value::boolean(true);
      return Value{};
    }
    case BinaryOp::Or: {
      auto x = logical(a);
      auto y = logical(b);
      if ((x && *x) || (y && *y)) return Value::boolean(true);
      if (x && y) return Value::boolean(false);
      return Value{};
    }
    default: break;
  }
  auto c = compare_sql(a, b);
  if (!c) return Value{};
  switch (op) {
    case BinaryOp::Eq: return Value::boolean(*c == 0);
    case BinaryOp::Ne: return Value::boolean(*c != 0);
    case BinaryOp::Lt: return Value::boolean(*c < 0);
    case BinaryOp::Le: return Value::boolean(*c <= 0);
    case BinaryOp::Gt: return Value::boolean(*c > 0);
    case BinaryOp::Ge: return Value::boolean(*c >= 0);
    default: break;
  }
  throw Error(ErrorCode::InvalidQuery, "unknown operator");
}

Value negate(const Value& v) {
  if (v.is_null()) return v;
  if (v.type() == Type::Int) {
    if (v.as_int() == std::numeric_limits<int64_t>::min()) throw Error(ErrorCode::NumericOverflow, "integer overflow in -");
    return Value::integer(-v.as_int());
  }
  if (v.type() == Type::Float) return Value::real(-v.as_float());
  throw Error(ErrorCode::TypeMismatch, "cannot negate " + std::string(type_name(v.type())));
}

// Equal under SQL '=' iff equal after this mapping (used for hash joins).
Value join_key(const Value& v) {
  if (v.type() == Type::Float) {
    double d = v.as_float();
    if (d == std::trunc(d) && d >= -9.2233720368547758e18 && d < 9.2233720368547758e18) {
      return Value::integer(static_cast<int64_t>(d));
    }
  }
  return v;
}

Type combine_numeric(Type a, Type b) {
  if (a == Type::Null) return b;
  if (b == Type::Null) return a;
  if (a == Type::Float || b == Type::Float) return Type::Float;
  return a;
}

// ---------------------------------------------------------------------------
// Bound expressions

struct Source {
  std::string name;
  std::vector<Column> columns;
  std::vector<const Row*> rows;
  TableBinding keep_alive;
};

struct Scope {
  std::vector<Source> sources;
  const Scope* outer = nullptr;
};

// Current tuple of one scope: one row pointer per source, nullptr for a
// null-extended LEFT JOIN side.
struct Frame {
  const Row* const* tuple = nullptr;
  const Frame* outer = nullptr;
};

struct PreparedQuery;

struct Node {
  enum class Kind { Const, Column, Neg, Not, Binary, IsNull, InList, Aggregate, Exists, Case, Coalesce };
  Kind kind = Kind::Const;
  Type type = Type::Null;
  Value constant;
  int depth = 0;
  int source = 0;
  int column = 0;
  BinaryOp op = BinaryOp::Add;
  bool negated = false;
  bool has_else = false;
  std::size_t agg_index = 0;
  std::vector<Node> kids;
  std::shared_ptr<const PreparedQuery> sub;
};

struct Aggregate {
  AggregateFunc func;
  std::optional<Node> arg;
};

Value eval(const Node& n, const Frame* frame, const std::vector<Value>* aggs);

struct JoinStep {
  JoinKind kind = JoinKind::Inner;
  std::vector<Node> left_keys;
  std::vector<Node> right_keys;
  std::vector<Node> right_filters;  // only reference the joined source
  std::vector<Node> residuals;
};

struct OrderKey {
  std::optional<std::size_t> output;  // sort by an output column
  std::optional<Node> expr;
  bool descending = false;
};

struct PreparedQuery {
  Scope scope;
  std::vector<JoinStep> joins;                  // joins[j-1] brings in source j
  std::vector<std::vector<Node>> stage_filters;  // applied once source j is joined
  std::vector<Node> constant_filters;           // reference no source of this scope
  bool aggregated = false;
  std::vector<Node> group_keys;
  std::vector<Aggregate> aggregates;
  std::vector<Node> outputs;
  std::vector<Column> out_columns;
  std::vector<OrderKey> order;
  std::optional<uint64_t> limit;

  // Joined, filtered tuples, flattened with stride scope.sources.size().
  std::vector<const Row*> tuples(const Frame* outer, bool stop_at_first) const;
  Relation run(const Frame* outer) const;
  bool exists(const Frame* outer) const;
};

bool passes(const std::vector<Node>& filters, const Frame* frame) {
  for (const auto& f : filters) {
    if (!truth(eval(f, frame, nullptr), "filter")) return false;
  }
  return true;
}

Value eval(const Node& n, const Frame* frame, const std::vector<Value>* aggs) {
  switch (n.kind) {
    case Node::Kind::Const: return n.constant;
    case Node::Kind::Column: {
      const Frame* f = frame;
      for (int d = 0; d < n.depth; ++d) f = f->outer;
      const Row* row = f->tuple[n.source];
      return row ? (*row)[static_cast<std::size_t>(n.column)] : Value{};
    }
    case Node::Kind::Neg: return negate(eval(n.kids[0], frame, aggs));
    case Node::Kind::Not: {
      auto b = logical(eval(n.kids[0], frame, aggs));
      return b ? Value::boolean(!*b) : Value{};
    }
    case Node::Kind::Binary: return binary(n.op, eval(n.kids[0], frame, aggs), eval(n.kids[1], frame, aggs));
    case Node::Kind::IsNull: return Value::boolean(eval(n.kids[0], frame, aggs).is_null() != n.negated);
    case Node::Kind::InList: {
      Value v = eval(n.kids[0], frame, aggs);
      if (v.is_null()) return Value{};
      bool saw_null = false;
      for (std::size_t i = 1; i < n.kids.size(); ++i) {
        auto c = compare_sql(v, eval(n.kids[i], frame, aggs));
        if (!c) {
          saw_null = true;
        } else if (*c == 0) {
          return Value::boolean(!n.negated);
        }
      }
      if (saw_null) return Value{};
      return Value::boolean(n.negated);
    }
    case Node::Kind::Aggregate: return (*aggs)[n.agg_index];
    case Node::Kind::Exists: {
      return Value::boolean(n.sub->exists(frame));
    }
    case Node::Kind::Case: {
      std::size_t pairs = (n.kids.size() - (n.has_else ? 1 : 0)) / 2;
      for (std::size_t i = 0; i < pairs; ++i) {
        if (truth(eval(n.kids[2 * i], frame, aggs), "CASE condition")) return eval(n.kids[2 * i + 1], frame, aggs);
      }
      if (n.has_else) return eval(n.kids.back(), frame, aggs);
      return Value{};
    }
    case Node::Kind::Coalesce: {
      for (const auto& k : n.kids) {
        Value v = eval(k, frame, aggs);
        if (!v.is_null()) return v;
      }
      return Value{};
    }
  }
  return Value{};
}

// Collects the depth-0 sources a node reads. `opaque` is set for
// constructs the planner should not move (EXISTS, aggregates).
void node_sources(const Node& n, std::vector<bool>& used, bool& opaque) {
  if (n.kind == Node::Kind::Column && n.depth == 0) used[static_cast<std::size_t>(n.source)] = true;
  if (n.kind == Node::Kind::Exists || n.kind == Node::Kind::Aggregate) opaque = true;
  for (const auto& k : n.kids) node_sources(k, used, opaque);
}

void flatten_and(const Expr& e, std::vector<const Expr*>& out) {
  if (e.is<BinaryExpr>() && e.as<BinaryExpr>().op == BinaryOp::And) {
    flatten_and(*e.as<BinaryExpr>().lhs, out);
    flatten_and(*e.as<BinaryExpr>().rhs, out);
  } else {
    out.push_back(&e);
  }
}

// ---------------------------------------------------------------------------
// Binder

class Binder {
 public:
  Binder(const Environment& env, const Database& db, LogicalTime at) : env_(env), db_(db), at_(at) {}

  std::shared_ptr<PreparedQuery> prepare(const QueryAst& q, const Scope* outer) {
    if (q.at_step) throw Error(ErrorCode::InvalidQuery, "AT STEP is only allowed in console queries");
    auto pq = std::make_shared<PreparedQuery>();
    pq->scope.outer = outer;
    if (q.from) add_source(pq->scope, *q.from);
    for (const auto& j : q.joins) add_source(pq->scope, j.source);
    const Scope& scope = pq->scope;
    std::size_t n = scope.sources.size();
    pq->stage_filters.resize(n);

    for (std::size_t j = 0; j < q.joins.size(); ++j) {
      std::size_t src = j + 1;
      JoinStep step;
      step.kind = q.joins[j].kind;
      std::vector<const Expr*> conjuncts;
      flatten_and(q.joins[j].on, conjuncts);
      for (const Expr* c : conjuncts) {
        Node node = bind(*c, scope, nullptr);
        std::vector<bool> used(n, false);
        bool opaque = false;
        node_sources(node, used, opaque);
        if (!opaque && only(used, src)) {
          step.right_filters.push_back(std::move(node));
          continue;
        }
        if (!opaque && node.kind == Node::Kind::Binary && node.op == BinaryOp::Eq) {
          std::vector<bool> lu(n, false);
          std::vector<bool> ru(n, false);
          bool lo = false;
          bool ro = false;
          node_sources(node.kids[0], lu, lo);
          node_sources(node.kids[1], ru, ro);
          if (before(lu, src) && only(ru, src)) {
            step.left_keys.push_back(std::move(node.kids[0]));
            step.right_keys.push_back(std::move(node.kids[1]));
            continue;
          }
          if (before(ru, src) && only(lu, src)) {
            step.left_keys.push_back(std::move(node.kids[1]));
            step.right_keys.push_back(std::move(node.kids[0]));
            continue;
          }
        }
        step.residuals.push_back(std::move(node));
      }
      pq->joins.push_back(std::move(step));
    }

    if (q.where) {
      std::vector<const Expr*> conjuncts;
      flatten_and(*q.where, conjuncts);
      for (const Expr* c : conjuncts) {
        Node node = bind(*c, scope, nullptr);
        std::vector<bool> used(n, false);
        bool opaque = false;
        node_sources(node, used, opaque);
        int last = -1;
        for (std::size_t i = 0; i < n; ++i) {
          if (used[i]) last = static_cast<int>(i);
        }
        if (opaque || n == 0) {
          if (n == 0) {
            pq->constant_filters.push_back(std::move(node));
          } else {
            pq->stage_filters[n - 1].push_back(std::move(node));
          }
        } else if (last <= 0) {
          pq->stage_filters[0].push_back(std::move(node));
        } else if (only(used, static_cast<std::size_t>(last)) && q.joins[static_cast<std::size_t>(last) - 1].kind == JoinKind::Inner) {
          pq->joins[static_cast<std::size_t>(last) - 1].right_filters.push_back(std::move(node));
        } else {
          pq->stage_filters[static_cast<std::size_t>(last)].push_back(std::move(node));
        }
      }
    }

    pq->aggregated = !q.group_by.empty();
    for (const auto& item : q.select) {
      if (item.expr && contains_aggregate(*item.expr)) pq->aggregated = true;
    }
    for (const auto& o : q.order_by) {
      if (contains_aggregate(o.expr)) pq->aggregated = true;
    }
    for (const auto& g : q.group_by) pq->group_keys.push_back(bind(g, scope, nullptr));

    std::vector<const Expr*> agg_exprs;
    for (const auto& item : q.select) {
      if (item.is_star()) {
        expand_star(*pq, item.star_qualifier);
        continue;
      }
      Node node = bind(*item.expr, scope, pq->aggregated ? pq.get() : nullptr, &agg_exprs);
      Column col;
      col.name = item.alias ? *item.alias : output_column_name(*item.expr);
      col.type = node.type;
      if (node.kind == Node::Kind::Column && node.depth == 0) {
        col.origin = scope.sources[static_cast<std::size_t>(node.source)].columns[static_cast<std::size_t>(node.column)].origin;
      }
      pq->out_columns.push_back(std::move(col));
      pq->outputs.push_back(std::move(node));
    }

    for (const auto& o : q.order_by) {
      OrderKey key;
      key.descending = o.descending;
      if (o.expr.is<ColumnRef>() && !o.expr.as<ColumnRef>().qualifier) {
        const std::string& name = o.expr.as<ColumnRef>().column;
        for (std::size_t i = 0; i < pq->out_columns.size(); ++i) {
          if (pq->out_columns[i].name == name) {
            key.output = i;
            break;
          }
        }
      }
      if (!key.output) key.expr = bind(o.expr, scope, pq->aggregated ? pq.get() : nullptr, &agg_exprs);
      pq->order.push_back(std::move(key));
    }
    pq->limit = q.limit;
    return pq;
  }

  Node bind(const Expr& e, const Scope& scope, PreparedQuery* agg_owner, std::vector<const Expr*>* agg_exprs = nullptr) {
    Node n;
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, Literal>) {
            n.kind = Node::Kind::Const;
            n.constant = node.value;
            n.type = node.value.type();
          } else if constexpr (std::is_same_v<T, ColumnRef>) {
            resolve(node, scope, n);
          } else if constexpr (std::is_same_v<T, QualifiedColumnRef>) {
            throw Error(ErrorCode::InvalidQuery,
                        "time qualifier " + node.step_name + "! needs a named AT STEP clause");
          } else if constexpr (std::is_same_v<T, VariableRef>) {
            n.kind = Node::Kind::Const;
            n.constant = env_.scalar(node.name);
            n.type = n.constant.type();
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            n.kind = node.op == UnaryOp::Neg ? Node::Kind::Neg : Node::Kind::Not;
            n.kids.push_back(bind(*node.operand, scope, agg_owner, agg_exprs));
            n.type = node.op == UnaryOp::Neg ? n.kids[0].type : Type::Bool;
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            n.kind = Node::Kind::Binary;
            n.op = node.op;
            n.kids.push_back(bind(*node.lhs, scope, agg_owner, agg_exprs));
            n.kids.push_back(bind(*node.rhs, scope, agg_owner, agg_exprs));
            switch (node.op) {
              case BinaryOp::Add:
              case BinaryOp::Sub:
              case BinaryOp::Mul:
              case BinaryOp::Div:
              case BinaryOp::Mod: n.type = combine_numeric(n.kids[0].type, n.kids[1].type); break;
              default: n.type = Type::Bool;
            }
          } else if constexpr (std::is_same_v<T, IsNullExpr>) {
            n.kind = Node::Kind::IsNull;
            n.negated = node.negated;
            n.kids.push_back(bind(*node.operand, scope, agg_owner, agg_exprs));
            n.type = Type::Bool;
          } else if constexpr (std::is_same_v<T, InListExpr>) {
            n.kind = Node::Kind::InList;
            n.negated = node.negated;
            n.kids.push_back(bind(*node.operand, scope, agg_owner, agg_exprs));
            for (const auto& i : node.items) n.kids.push_back(bind(i, scope, agg_owner, agg_exprs));
            n.type = Type::Bool;
          } else if constexpr (std::is_same_v<T, AggregateExpr>) {
            if (!agg_owner) throw Error(ErrorCode::InvalidQuery, "aggregate not allowed here");
            n.kind = Node::Kind::Aggregate;
            Aggregate agg{node.func, std::nullopt};
            if (node.arg) agg.arg = bind(**node.arg, scope, nullptr);
            switch (node.func) {
              case AggregateFunc::Count: n.type = Type::Int; break;
              case AggregateFunc::Avg: n.type = Type::Float; break;
              default: n.type = agg.arg ? agg.arg->type : Type::Int;
            }
            // identical aggregate calls share one accumulator
            std::size_t idx = agg_owner->aggregates.size();
            if (agg_exprs) {
              for (std::size_t i = 0; i < agg_exprs->size(); ++i) {
                if (*(*agg_exprs)[i] == e) idx = i;
              }
            }
            if (idx == agg_owner->aggregates.size()) {
              agg_owner->aggregates.push_back(std::move(agg));
              if (agg_exprs) agg_exprs->push_back(&e);
            }
            n.agg_index = idx;
          } else if constexpr (std::is_same_v<T, ExistsExpr>) {
            n.kind = Node::Kind::Exists;
            n.sub = prepare(*node.query, &scope);
            n.type = Type::Bool;
          } else if constexpr (std::is_same_v<T, CaseExpr>) {
            n.kind = Node::Kind::Case;
            Type t = Type::Null;
            for (const auto& [c, v] : node.whens) {
              n.kids.push_back(bind(c, scope, agg_owner, agg_exprs));
              n.kids.push_back(bind(v, scope, agg_owner, agg_exprs));
              t = merge_type(t, n.kids.back().type);
            }
            if (node.otherwise) {
              n.has_else = true;
              n.kids.push_back(bind(**node.otherwise, scope, agg_owner, agg_exprs));
              t = merge_type(t, n.kids.back().type);
            }
            n.type = t;
          } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
            n.kind = Node::Kind::Coalesce;
            Type t = Type::Null;
            for (const auto& a : node.args) {
              n.kids.push_back(bind(a, scope, agg_owner, agg_exprs));
              t = merge_type(t, n.kids.back().type);
            }
            n.type = t;
          }
        },
        e.node);
    return n;
  }

  void add_source(Scope& scope, const TableSource& ts) {
    Source src;
    src.name = ts.binding_name();
    for (const auto& existing : scope.sources) {
      if (existing.name == src.name) throw Error(ErrorCode::InvalidQuery, "source name '" + src.name + "' used twice");
    }
    int index = static_cast<int>(scope.sources.size());
    if (ts.is_variable) {
      src.keep_alive = env_.table(ts.name);
      for (const auto& c : src.keep_alive->columns) {
        Column col = c;
        if (col.origin) {
          col.origin->source = index;
          col.origin->via_variable = true;
        }
        src.columns.push_back(std::move(col));
      }
      src.rows.reserve(src.keep_alive->rows.size());
      for (const auto& r : src.keep_alive->rows) src.rows.push_back(&r);
    } else {
      const TableDef& def = db_.table_def(ts.name);
      for (const auto& c : def.columns) src.columns.push_back(Column{c.name, c.type, ColumnOrigin{def.name, c.name, index, false}});
      for (const auto* v : db_.visible_versions(ts.name, at_)) src.rows.push_back(&v->values);
    }
    scope.sources.push_back(std::move(src));
  }

 private:
  static bool contains_aggregate(const Expr& e) {
    bool found = false;
    visit_expr(e, [&](const Expr& x) { found = found || x.is<AggregateExpr>(); });
    return found;
  }

  static Type merge_type(Type a, Type b) {
    if (a == Type::Null) return b;
    if (b == Type::Null || a == b) return a;
    if ((a == Type::Int || a == Type::Float) && (b == Type::Int || b == Type::Float)) return Type::Float;
    return a;
  }

  static bool only(const std::vector<bool>& used, std::size_t src) {
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (used[i] != (i == src)) return false;
    }
    return true;
  }

  static bool before(const std::vector<bool>& used, std::size_t src) {
    bool any = false;
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (used[i] && i >= src) return false;
      any = any || used[i];
    }
    return any;
  }

  void expand_star(PreparedQuery& pq, const std::optional<std::string>& qualifier) {
    const auto& sources = pq.scope.sources;
    bool found = false;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (qualifier && sources[s].name != *qualifier) continue;
      found = true;
      for (std::size_t c = 0; c < sources[s].columns.size(); ++c) {
        Node n;
        n.kind = Node::Kind::Column;
        n.source = static_cast<int>(s);
        n.column = static_cast<int>(c);
        n.type = sources[s].columns[c].type;
        Column col = sources[s].columns[c];
        if (sources.size() > 1) col.name = sources[s].name + "." + col.name;
        pq.outputs.push_back(std::move(n));
        pq.out_columns.push_back(std::move(col));
      }
    }
    if (qualifier && !found) throw Error(ErrorCode::UnknownColumn, "unknown source '" + *qualifier + "' in " + *qualifier + ".*");
    if (pq.aggregated) throw Error(ErrorCode::InvalidQuery, "* cannot be combined with grouping");
  }

  static std::vector<int> match_columns(const Source& src, const std::string& column) {
    std::vector<int> exact;
    for (std::size_t c = 0; c < src.columns.size(); ++c) {
      if (src.columns[c].name == column) exact.push_back(static_cast<int>(c));
    }
    if (!exact.empty()) return exact;
    std::vector<int> suffix;
    std::string tail = "." + column;
    for (std::size_t c = 0; c < src.columns.size(); ++c) {
      const std::string& name = src.columns[c].name;
      if (name.size() > tail.size() && name.compare(name.size() - tail.size(), tail.size(), tail) == 0) {
        suffix.push_back(static_cast<int>(c));
      }
    }
    return suffix;
  }

  static void set_column(Node& n, int depth, int source, int column, const Scope& scope) {
    n.kind = Node::Kind::Column;
    n.depth = depth;
    n.source = source;
    n.column = column;
    n.type = scope.sources[static_cast<std::size_t>(source)].columns[static_cast<std::size_t>(column)].type;
  }

  void resolve(const ColumnRef& ref, const Scope& innermost, Node& n) {
    std::string display = ref.qualifier ? *ref.qualifier + "." + ref.column : ref.column;
    int depth = 0;
    for (const Scope* scope = &innermost; scope; scope = scope->outer, ++depth) {
      if (ref.qualifier) {
        for (std::size_t s = 0; s < scope->sources.size(); ++s) {
          if (scope->sources[s].name != *ref.qualifier) continue;
          auto m = match_columns(scope->sources[s], ref.column);
          if (m.size() > 1) throw Error(ErrorCode::AmbiguousColumn, "column " + display + " is ambiguous");
          if (m.empty()) throw Error(ErrorCode::UnknownColumn, "unknown column " + display);
          set_column(n, depth, static_cast<int>(s), m[0], *scope);
          return;
        }
      }
      // A bare name, or a dotted name that is literally a column name.
      const std::string& wanted = ref.qualifier ? display : ref.column;
      std::vector<std::pair<int, int>> exact;
      for (std::size_t s = 0; s < scope->sources.size(); ++s) {
        const auto& cols = scope->sources[s].columns;
        for (std::size_t c = 0; c < cols.size(); ++c) {
          if (cols[c].name == wanted) exact.emplace_back(static_cast<int>(s), static_cast<int>(c));
        }
      }
      if (exact.empty() && !ref.qualifier) {
        for (std::size_t s = 0; s < scope->sources.size(); ++s) {
          for (int c : match_columns(scope->sources[s], ref.column)) exact.emplace_back(static_cast<int>(s), c);
        }
      }
      if (exact.size() > 1) throw Error(ErrorCode::AmbiguousColumn, "column " + display + " is ambiguous");
      if (exact.size() == 1) {
        set_column(n, depth, exact[0].first, exact[0].second, *scope);
        return;
      }
    }
    throw Error(ErrorCode::UnknownColumn, "unknown column " + display);
  }

  const Environment& env_;
  const Database& db_;
  LogicalTime at_;
};

// ---------------------------------------------------------------------------
// Execution

struct KeyHash {
  std::size_t operator()(const Row& r) const noexcept { return RowHash{}(r); }
};

std::vector<const Row*> PreparedQuery::tuples(const Frame* outer, bool stop_at_first) const {
  std::size_t n = scope.sources.size();
  std::vector<const Row*> out;
  if (n == 0) {
    Frame f{nullptr, outer};
    if (passes(constant_filters, &f)) out.push_back(nullptr);  // one empty tuple
    return out;
  }
  std::vector<const Row*> tuple(n, nullptr);
  Frame frame{tuple.data(), outer};
  std::vector<const Row*> current;
  for (const Row* r : scope.sources[0].rows) {
    tuple[0] = r;
    if (!passes(stage_filters[0], &frame)) continue;
    current.insert(current.end(), tuple.begin(), tuple.end());
    if (stop_at_first && n == 1) return current;
  }

  for (std::size_t j = 1; j < n; ++j) {
    const JoinStep& step = joins[j - 1];
    bool last = j + 1 == n;
    std::fill(tuple.begin(), tuple.end(), nullptr);
    std::vector<const Row*> right;
    right.reserve(scope.sources[j].rows.size());
    for (const Row* r : scope.sources[j].rows) {
      tuple[j] = r;
      if (passes(step.right_filters, &frame)) right.push_back(r);
    }
    std::unordered_map<Row, std::vector<const Row*>, KeyHash> index;
    if (!step.right_keys.empty()) {
      for (const Row* r : right) {
        tuple[j] = r;
        Row key;
        key.reserve(step.right_keys.size());
        bool has_null = false;
        for (const auto& k : step.right_keys) {
          Value v = eval(k, &frame, nullptr);
          has_null = has_null || v.is_null();
          key.push_back(join_key(v));
        }
        if (!has_null) index[std::move(key)].push_back(r);
      }
    }
    std::vector<const Row*> next;
    const std::size_t count = current.size() / n;
    for (std::size_t t = 0; t < count; ++t) {
      std::copy(current.begin() + static_cast<std::ptrdiff_t>(t * n), current.begin() + static_cast<std::ptrdiff_t>(t * n + n),
                tuple.begin());
      const std::vector<const Row*>* candidates = &right;
      std::vector<const Row*> none;
      if (!step.left_keys.empty()) {
        Row key;
        key.reserve(step.left_keys.size());
        bool has_null = false;
        for (const auto& k : step.left_keys) {
          Value v = eval(k, &frame, nullptr);
          has_null = has_null || v.is_null();
          key.push_back(join_key(v));
        }
        auto it = has_null ? index.end() : index.find(key);
        candidates = it == index.end() ? &none : &it->second;
      }
      bool matched = false;
      for (const Row* r : *candidates) {
        tuple[j] = r;
        if (!passes(step.residuals, &frame)) continue;
        matched = true;
        if (!passes(stage_filters[j], &frame)) continue;
        next.insert(next.end(), tuple.begin(), tuple.end());
        if (stop_at_first && last) return next;
      }
      if (!matched && step.kind == JoinKind::Left) {
        tuple[j] = nullptr;
        if (passes(stage_filters[j], &frame)) {
          next.insert(next.end(), tuple.begin(), tuple.end());
          if (stop_at_first && last) return next;
        }
      }
    }
    current = std::move(next);
  }
  return current;
}

bool PreparedQuery::exists(const Frame* outer) const {
  if (limit && *limit == 0) return false;
  if (aggregated && group_keys.empty()) return true;
  return !tuples(outer, true).empty();
}

struct Accumulator {
  int64_t count = 0;
  int64_t int_sum = 0;
  double float_sum = 0;
  bool has_float = false;
  Value best;
};

void accumulate(const Aggregate& agg, Accumulator& acc, const Frame* frame) {
  if (!agg.arg) {
    ++acc.count;
    return;
  }
  Value v = eval(*agg.arg, frame, nullptr);
  if (v.is_null()) return;
  ++acc.count;
  switch (agg.func) {
    case AggregateFunc::Count: break;
    case AggregateFunc::Sum:
    case AggregateFunc::Avg:
      if (v.type() == Type::Int) {
        if (__builtin_add_overflow(acc.int_sum, v.as_int(), &acc.int_sum)) {
          throw Error(ErrorCode::NumericOverflow, "integer overflow in SUM");
        }
      } else if (v.type() == Type::Float) {
        acc.float_sum += v.as_float();
        acc.has_float = true;
      } else {
        throw Error(ErrorCode::TypeMismatch, "cannot sum " + std::string(type_name(v.type())));
      }
      break;
    case AggregateFunc::Min:
    case AggregateFunc::Max: {
      if (acc.count == 1) {
        acc.best = v;
        break;
      }
      int c = *compare_sql(v, acc.best);
      if ((agg.func == AggregateFunc::Min && c < 0) || (agg.func == AggregateFunc::Max && c > 0)) acc.best = v;
      break;
    }
  }
}

Value finish(const Aggregate& agg, const Accumulator& acc) {
  switch (agg.func) {
    case AggregateFunc::Count: return Value::integer(acc.count);
    case AggregateFunc::Sum:
      if (acc.count == 0) return Value{};
      if (acc.has_float) return checked_float(static_cast<double>(acc.int_sum) + acc.float_sum);
      return Value::integer(acc.int_sum);
    case AggregateFunc::Avg:
      if (acc.count == 0) return Value{};
      return checked_float((static_cast<double>(acc.int_sum) + acc.float_sum) / static_cast<double>(acc.count));
    case AggregateFunc::Min:
    case AggregateFunc::Max: return acc.count == 0 ? Value{} : acc.best;
  }
  return Value{};
}

Relation PreparedQuery::run(const Frame* outer) const {
  std::size_t n = scope.sources.size();
  std::vector<const Row*> flat = tuples(outer, false);
  std::size_t stride = std::max<std::size_t>(n, 1);
  std::size_t count = n == 0 ? flat.size() : flat.size() / n;

  Relation rel;
  rel.columns = out_columns;
  std::vector<Row> sort_keys;
  bool order_needs_keys = !order.empty();

  auto emit = [&](const Frame* frame, const std::vector<Value>* aggs) {
    Row row;
    row.reserve(outputs.size());
    for (const auto& o : outputs) row.push_back(eval(o, frame, aggs));
    if (order_needs_keys) {
      Row key;
      for (const auto& k : order) key.push_back(k.output ? row[*k.output] : eval(*k.expr, frame, aggs));
      sort_keys.push_back(std::move(key));
    }
    rel.rows.push_back(std::move(row));
  };

  std::vector<const Row*> empty(stride, nullptr);
  if (!aggregated) {
    rel.rows.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
      Frame f{n == 0 ? empty.data() : flat.data() + t * n, outer};
      emit(&f, nullptr);
    }
  } else {
    struct Group {
      std::size_t representative;
      std::vector<Accumulator> accs;
    };
    std::vector<Group> groups;
    std::unordered_map<Row, std::size_t, KeyHash> by_key;
    if (group_keys.empty()) groups.push_back(Group{SIZE_MAX, std::vector<Accumulator>(aggregates.size())});
    for (std::size_t t = 0; t < count; ++t) {
      Frame f{n == 0 ? empty.data() : flat.data() + t * n, outer};
      std::size_t g = 0;
      if (!group_keys.empty()) {
        Row key;
        key.reserve(group_keys.size());
        for (const auto& k : group_keys) key.push_back(eval(k, &f, nullptr));
        auto [it, inserted] = by_key.try_emplace(std::move(key), groups.size());
        if (inserted) groups.push_back(Group{t, std::vector<Accumulator>(aggregates.size())});
        g = it->second;
      }
      for (std::size_t a = 0; a < aggregates.size(); ++a) accumulate(aggregates[a], groups[g].accs[a], &f);
    }
    for (const auto& g : groups) {
      std::vector<Value> values;
      values.reserve(aggregates.size());
      for (std::size_t a = 0; a < aggregates.size(); ++a) values.push_back(finish(aggregates[a], g.accs[a]));
      const Row* const* tuple = g.representative == SIZE_MAX || n == 0 ? empty.data() : flat.data() + g.representative * n;
      Frame f{tuple, outer};
      emit(&f, &values);
    }
  }

  std::vector<std::size_t> idx(rel.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < order.size(); ++k) {
      int c = compare_total(sort_keys[a][k], sort_keys[b][k]);
      if (c != 0) return order[k].descending ? c > 0 : c < 0;
    }
    return compare_rows(rel.rows[a], rel.rows[b]) < 0;
  });
  std::size_t keep = limit ? std::min<std::size_t>(idx.size(), *limit) : idx.size();
  std::vector<Row> sorted;
  sorted.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) sorted.push_back(std::move(rel.rows[idx[i]]));
  rel.rows = std::move(sorted);
  return rel;
}

// Scope over a single base table, for UPDATE/DELETE predicates.
Scope table_scope(const TableDef& def) {
  Scope scope;
  Source src;
  src.name = def.name;
  for (const auto& c : def.columns) src.columns.push_back(Column{c.name, c.type, std::nullopt});
  scope.sources.push_back(std::move(src));
  return scope;
}

}  // namespace

std::optional<std::size_t> resolve_in_relation(const Relation& rel, const ColumnRef& ref) {
  std::string full = ref.qualifier ? *ref.qualifier + "." + ref.column : ref.column;
  std::optional<std::size_t> found;
  for (std::size_t c = 0; c < rel.columns.size(); ++c) {
    if (rel.columns[c].name == full) {
      if (found) throw Error(ErrorCode::AmbiguousColumn, "column " + full + " is ambiguous");
      found = c;
    }
  }
  if (found || ref.qualifier) return found;
  std::string tail = "." + ref.column;
  for (std::size_t c = 0; c < rel.columns.size(); ++c) {
    const std::string& name = rel.columns[c].name;
    if (name.size() > tail.size() && name.compare(name.size() - tail.size(), tail.size(), tail) == 0) {
      if (found) throw Error(ErrorCode::AmbiguousColumn, "column " + full + " is ambiguous");
      found = c;
    }
  }
  return found;
}

Relation evaluate(const QueryAst& q, const Environment& env, const Database& db, LogicalTime at) {
  Binder binder(env, db, at);
  auto pq = binder.prepare(q, nullptr);
  return pq->run(nullptr);
}

Value evaluate_scalar(const Expr& e, const Environment& env, const Database& db, LogicalTime at) {
  Binder binder(env, db, at);
  Scope scope;
  Node n = binder.bind(e, scope, nullptr);
  Frame f{nullptr, nullptr};
  return eval(n, &f, nullptr);
}

std::size_t execute_dml(const Statement& stmt, const Environment& env, Database& db) {
  LogicalTime t = db.advance_clock();
  Binder binder(env, db, t);
  if (stmt.is<InsertStmt>()) {
    const auto& ins = stmt.as<InsertStmt>();
    const TableDef& def = db.table_def(ins.table);
    std::vector<std::size_t> target;  // position in the table for each provided value
    if (ins.columns.empty()) {
      for (std::size_t i = 0; i < def.columns.size(); ++i) target.push_back(i);
    } else {
      for (const auto& c : ins.columns) {
        auto idx = def.column_index(c);
        if (!idx) throw Error(ErrorCode::UnknownColumn, "unknown column " + c + " in " + def.name);
        if (std::find(target.begin(), target.end(), *idx) != target.end()) {
          throw Error(ErrorCode::InvalidQuery, "column " + c + " listed twice");
        }
        target.push_back(*idx);
      }
    }
    std::vector<Row> rows;
    auto place = [&](Row provided) {
      if (provided.size() != target.size()) {
        throw Error(ErrorCode::InvalidQuery, "INSERT into " + def.name + " expects " + std::to_string(target.size()) +
                                                 " values, got " + std::to_string(provided.size()));
      }
      Row row(def.columns.size());
      for (std::size_t i = 0; i < target.size(); ++i) row[target[i]] = std::move(provided[i]);
      rows.push_back(std::move(row));
    };
    if (std::holds_alternative<QueryAst>(ins.source)) {
      Relation rel = evaluate(std::get<QueryAst>(ins.source), env, db, t);
      for (auto& r : rel.rows) place(std::move(r));
    } else {
      Scope empty;
      Frame f{nullptr, nullptr};
      for (const auto& exprs : std::get<std::vector<std::vector<Expr>>>(ins.source)) {
        Row provided;
        for (const auto& e : exprs) provided.push_back(eval(binder.bind(e, empty, nullptr), &f, nullptr));
        place(std::move(provided));
      }
    }
    return db.apply_insert(ins.table, rows, t);
  }

  auto make_predicate = [&](const std::optional<Expr>& where, const Scope& scope) -> RowPredicate {
    if (!where) return [](const Row&) { return true; };
    auto node = std::make_shared<Node>(binder.bind(*where, scope, nullptr));
    return [node](const Row& r) {
      const Row* tuple[1] = {&r};
      Frame f{tuple, nullptr};
      return truth(eval(*node, &f, nullptr), "WHERE");
    };
  };

  if (stmt.is<UpdateStmt>()) {
    const auto& up = stmt.as<UpdateStmt>();
    const TableDef& def = db.table_def(up.table);
    Scope scope = table_scope(def);
    std::vector<Assignment> assignments;
    for (const auto& [col, e] : up.assignments) {
      if (!def.column_index(col)) throw Error(ErrorCode::UnknownColumn, "unknown column " + col + " in " + def.name);
      auto node = std::make_shared<Node>(binder.bind(e, scope, nullptr));
      assignments.push_back(Assignment{col, [node](const Row& r) {
                                         const Row* tuple[1] = {&r};
                                         Frame f{tuple, nullptr};
                                         return eval(*node, &f, nullptr);
                                       }});
    }
    return db.apply_update(up.table, make_predicate(up.where, scope), assignments, t);
  }
  if (stmt.is<DeleteStmt>()) {
    const auto& del = stmt.as<DeleteStmt>();
    Scope scope = table_scope(db.table_def(del.table));
    return db.apply_delete(del.table, make_predicate(del.where, scope), t);
  }
  throw Error(ErrorCode::InvalidQuery, "not a DML statement");
}

}  // namespace tardisp
