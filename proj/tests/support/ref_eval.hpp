#pragma once

// Brute-force query evaluator: nested loops over every source combination,
// linear-scan grouping, no planning. Shares only Value primitives and the
// renderer (for output column names) with the engine.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tardisp/ast.hpp"
#include "tardisp/error.hpp"
#include "tardisp/relation.hpp"
#include "tardisp/render.hpp"

namespace tardisp::testing {

struct RefData {
  std::map<std::string, Relation> tables;
  std::map<std::string, Relation> table_vars;
  std::map<std::string, Value> scalars;
};

class RefEvaluator {
 public:
  explicit RefEvaluator(const RefData& data) : data_(data) {}

  Relation run(const QueryAst& q) { return run(q, nullptr); }

 private:
  struct Level {
    std::vector<std::string> names;
    std::vector<const Relation*> rels;
    std::vector<const Row*> rows;
    const Level* outer = nullptr;
  };

  const Relation& source_rel(const TableSource& s) const {
    if (s.is_variable) return data_.table_vars.at(s.name);
    return data_.tables.at(s.name);
  }

  Relation run(const QueryAst& q, const Level* outer) {
    std::vector<const TableSource*> sources;
    if (q.from) sources.push_back(&*q.from);
    for (const auto& j : q.joins) sources.push_back(&j.source);

    Level proto;
    proto.outer = outer;
    for (const auto* s : sources) {
      proto.names.push_back(s->binding_name());
      proto.rels.push_back(&source_rel(*s));
      proto.rows.push_back(nullptr);
    }

    // Cartesian product with ON applied join by join.
    std::vector<std::vector<const Row*>> combos;
    if (sources.empty()) {
      combos.emplace_back();
    } else {
      for (const auto& r : proto.rels[0]->rows) combos.push_back({&r});
    }
    for (std::size_t j = 1; j < sources.size(); ++j) {
      std::vector<std::vector<const Row*>> next;
      for (const auto& combo : combos) {
        bool any = false;
        for (const auto& r : proto.rels[j]->rows) {
          Level lv = proto;
          for (std::size_t i = 0; i < combo.size(); ++i) lv.rows[i] = combo[i];
          lv.rows[j] = &r;
          if (is_true(eval(q.joins[j - 1].on, lv, nullptr))) {
            auto c = combo;
            c.push_back(&r);
            next.push_back(std::move(c));
            any = true;
          }
        }
        if (!any && q.joins[j - 1].kind == JoinKind::Left) {
          auto c = combo;
          c.push_back(nullptr);
          next.push_back(std::move(c));
        }
      }
      combos = std::move(next);
    }

    std::vector<Level> kept;
    for (const auto& combo : combos) {
      Level lv = proto;
      for (std::size_t i = 0; i < combo.size(); ++i) lv.rows[i] = combo[i];
      if (!q.where || is_true(eval(*q.where, lv, nullptr))) kept.push_back(std::move(lv));
    }

    bool aggregated = !q.group_by.empty();
    for (const auto& item : q.select) aggregated = aggregated || (item.expr && has_aggregate(*item.expr));
    for (const auto& o : q.order_by) aggregated = aggregated || has_aggregate(o.expr);

    Relation out;
    for (const auto& item : q.select) {
      if (item.is_star()) {
        for (std::size_t s = 0; s < sources.size(); ++s) {
          if (item.star_qualifier && proto.names[s] != *item.star_qualifier) continue;
          for (const auto& c : proto.rels[s]->columns) {
            out.columns.push_back(Column{sources.size() > 1 ? proto.names[s] + "." + c.name : c.name, c.type, {}});
          }
        }
      } else {
        std::string name;
        if (item.alias) {
          name = *item.alias;
        } else if (item.expr->is<ColumnRef>()) {
          const auto& c = item.expr->as<ColumnRef>();
          name = c.qualifier ? *c.qualifier + "." + c.column : c.column;
        } else {
          name = render_expr(*item.expr);
        }
        out.columns.push_back(Column{name, Type::Null, {}});
      }
    }

    std::vector<std::vector<Level>> groups;
    if (aggregated) {
      std::vector<Row> keys;
      for (auto& lv : kept) {
        Row key;
        for (const auto& g : q.group_by) key.push_back(eval(g, lv, nullptr));
        std::size_t gi = 0;
        while (gi < keys.size() && !(keys[gi] == key)) ++gi;
        if (gi == keys.size()) {
          keys.push_back(key);
          groups.emplace_back();
        }
        groups[gi].push_back(lv);
      }
      if (q.group_by.empty() && groups.empty()) groups.emplace_back();
    } else {
      for (auto& lv : kept) groups.push_back({lv});
    }

    std::vector<std::pair<Row, Row>> rows;  // (order keys, output)
    for (const auto& g : groups) {
      Level rep = g.empty() ? proto : g.front();
      const std::vector<Level>* members = aggregated ? &g : nullptr;
      Row row;
      for (const auto& item : q.select) {
        if (item.is_star()) {
          for (std::size_t s = 0; s < sources.size(); ++s) {
            if (item.star_qualifier && proto.names[s] != *item.star_qualifier) continue;
            for (std::size_t c = 0; c < proto.rels[s]->columns.size(); ++c) {
              row.push_back(rep.rows[s] ? (*rep.rows[s])[c] : Value{});
            }
          }
        } else {
          row.push_back(eval(*item.expr, rep, members));
        }
      }
      Row keys;
      for (const auto& o : q.order_by) {
        std::optional<std::size_t> alias_col;
        if (o.expr.is<ColumnRef>() && !o.expr.as<ColumnRef>().qualifier) {
          for (std::size_t i = 0; i < out.columns.size() && !alias_col; ++i) {
            if (out.columns[i].name == o.expr.as<ColumnRef>().column) alias_col = i;
          }
        }
        keys.push_back(alias_col ? row[*alias_col] : eval(o.expr, rep, members));
      }
      rows.emplace_back(std::move(keys), std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
      for (std::size_t k = 0; k < q.order_by.size(); ++k) {
        int c = compare_total(a.first[k], b.first[k]);
        if (c != 0) return q.order_by[k].descending ? c > 0 : c < 0;
      }
      return compare_rows(a.second, b.second) < 0;
    });
    std::size_t n = q.limit ? std::min<std::size_t>(rows.size(), *q.limit) : rows.size();
    for (std::size_t i = 0; i < n; ++i) out.rows.push_back(rows[i].second);
    return out;
  }

  static bool has_aggregate(const Expr& e) {
    bool found = false;
    visit_expr(e, [&](const Expr& x) { found = found || x.is<AggregateExpr>(); });
    return found;
  }

  static bool is_true(const Value& v) {
    if (v.is_null()) return false;
    if (v.type() != Type::Bool) throw Error(ErrorCode::TypeMismatch, "not boolean");
    return v.as_bool();
  }

  static int tri(const Value& v) {  // -1 unknown, 0 false, 1 true
    if (v.is_null()) return -1;
    if (v.type() != Type::Bool) throw Error(ErrorCode::TypeMismatch, "not boolean");
    return v.as_bool() ? 1 : 0;
  }

  static Value column(const ColumnRef& ref, const Level& lv) {
    for (const Level* l = &lv; l; l = l->outer) {
      int hits = 0;
      Value found;
      for (std::size_t s = 0; s < l->names.size(); ++s) {
        if (ref.qualifier && l->names[s] != *ref.qualifier) continue;
        const auto& cols = l->rels[s]->columns;
        for (std::size_t c = 0; c < cols.size(); ++c) {
          if (cols[c].name == ref.column) {
            ++hits;
            found = l->rows[s] ? (*l->rows[s])[c] : Value{};
          }
        }
      }
      if (hits > 1) throw Error(ErrorCode::AmbiguousColumn, ref.column);
      if (hits == 1) return found;
    }
    throw Error(ErrorCode::UnknownColumn, ref.column);
  }

  static Value arith(BinaryOp op, const Value& a, const Value& b) {
    if (a.is_null() || b.is_null()) return Value{};
    if (!a.is_numeric() || !b.is_numeric()) throw Error(ErrorCode::TypeMismatch, "arith");
    if (a.type() == Type::Int && b.type() == Type::Int) {
      __int128 x = a.as_int();
      __int128 y = b.as_int();
      __int128 r = 0;
      switch (op) {
        case BinaryOp::Add: r = x + y; break;
        case BinaryOp::Sub: r = x - y; break;
        case BinaryOp::Mul: r = x * y; break;
        case BinaryOp::Div:
          if (y == 0) throw Error(ErrorCode::DivisionByZero, "div");
          r = x / y;
          break;
        default:
          if (y == 0) throw Error(ErrorCode::DivisionByZero, "mod");
          r = x % y;
      }
      if (r > INT64_MAX || r < INT64_MIN) throw Error(ErrorCode::NumericOverflow, "overflow");
      return Value::integer(static_cast<int64_t>(r));
    }
    double x = a.to_double();
    double y = b.to_double();
    double r = 0;
    switch (op) {
      case BinaryOp::Add: r = x + y; break;
      case BinaryOp::Sub: r = x - y; break;
      case BinaryOp::Mul: r = x * y; break;
      case BinaryOp::Div:
        if (y == 0) throw Error(ErrorCode::DivisionByZero, "div");
        r = x / y;
        break;
      default:
        if (y == 0) throw Error(ErrorCode::DivisionByZero, "mod");
        r = std::fmod(x, y);
    }
    if (!std::isfinite(r)) throw Error(ErrorCode::NumericOverflow, "overflow");
    return Value::real(r);
  }

  Value aggregate(const AggregateExpr& agg, const std::vector<Level>& members) {
    std::vector<Value> vals;
    for (const auto& m : members) {
      if (!agg.arg) {
        vals.push_back(Value::integer(1));
        continue;
      }
      Value v = eval(**agg.arg, m, nullptr);
      if (!v.is_null()) vals.push_back(v);
    }
    switch (agg.func) {
      case AggregateFunc::Count: return Value::integer(static_cast<int64_t>(vals.size()));
      case AggregateFunc::Sum:
      case AggregateFunc::Avg: {
        if (vals.empty()) return Value{};
        __int128 isum = 0;
        double fsum = 0;
        bool any_float = false;
        for (const auto& v : vals) {
          if (v.type() == Type::Int) {
            isum += v.as_int();
          } else if (v.type() == Type::Float) {
            fsum += v.as_float();
            any_float = true;
          } else {
            throw Error(ErrorCode::TypeMismatch, "sum");
          }
        }
        if (isum > INT64_MAX || isum < INT64_MIN) throw Error(ErrorCode::NumericOverflow, "sum");
        double total = static_cast<double>(static_cast<int64_t>(isum)) + fsum;
        if (agg.func == AggregateFunc::Avg) return Value::real(total / static_cast<double>(vals.size()));
        if (any_float) return Value::real(total);
        return Value::integer(static_cast<int64_t>(isum));
      }
      case AggregateFunc::Min:
      case AggregateFunc::Max: {
        if (vals.empty()) return Value{};
        Value best = vals[0];
        for (const auto& v : vals) {
          int c = *compare_sql(v, best);
          if (agg.func == AggregateFunc::Min ? c < 0 : c > 0) best = v;
        }
        return best;
      }
    }
    return Value{};
  }

  Value eval(const Expr& e, const Level& lv, const std::vector<Level>* members) {
    if (e.is<Literal>()) return e.as<Literal>().value;
    if (e.is<ColumnRef>()) return column(e.as<ColumnRef>(), lv);
    if (e.is<VariableRef>()) return data_.scalars.at(e.as<VariableRef>().name);
    if (e.is<AggregateExpr>()) return aggregate(e.as<AggregateExpr>(), members ? *members : std::vector<Level>{});
    if (e.is<UnaryExpr>()) {
      Value v = eval(*e.as<UnaryExpr>().operand, lv, members);
      if (e.as<UnaryExpr>().op == UnaryOp::Not) {
        int t = tri(v);
        return t < 0 ? Value{} : Value::boolean(t == 0);
      }
      if (v.is_null()) return v;
      if (v.type() == Type::Int) {
        if (v.as_int() == INT64_MIN) throw Error(ErrorCode::NumericOverflow, "neg");
        return Value::integer(-v.as_int());
      }
      if (v.type() == Type::Float) return Value::real(-v.as_float());
      throw Error(ErrorCode::TypeMismatch, "neg");
    }
    if (e.is<BinaryExpr>()) {
      const auto& b = e.as<BinaryExpr>();
      Value x = eval(*b.lhs, lv, members);
      Value y = eval(*b.rhs, lv, members);
      switch (b.op) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
        case BinaryOp::Mul:
        case BinaryOp::Div:
        case BinaryOp::Mod: return arith(b.op, x, y);
        case BinaryOp::And: {
          int p = tri(x), r = tri(y);
          if (p == 0 || r == 0) return Value::boolean(false);
          if (p == 1 && r == 1) return Value::boolean(true);
          return Value{};
        }
        case BinaryOp::Or: {
          int p = tri(x), r = tri(y);
          if (p == 1 || r == 1) return Value::boolean(true);
          if (p == 0 && r == 0) return Value::boolean(false);
          return Value{};
        }
        default: break;
      }
      auto c = compare_sql(x, y);
      if (!c) return Value{};
      switch (b.op) {
        case BinaryOp::Eq: return Value::boolean(*c == 0);
        case BinaryOp::Ne: return Value::boolean(*c != 0);
        case BinaryOp::Lt: return Value::boolean(*c < 0);
        case BinaryOp::Le: return Value::boolean(*c <= 0);
        case BinaryOp::Gt: return Value::boolean(*c > 0);
        default: return Value::boolean(*c >= 0);
      }
    }
    if (e.is<IsNullExpr>()) {
      bool null = eval(*e.as<IsNullExpr>().operand, lv, members).is_null();
      return Value::boolean(null != e.as<IsNullExpr>().negated);
    }
    if (e.is<InListExpr>()) {
      const auto& in = e.as<InListExpr>();
      Value v = eval(*in.operand, lv, members);
      if (v.is_null()) return Value{};
      bool unknown = false;
      for (const auto& item : in.items) {
        auto c = compare_sql(v, eval(item, lv, members));
        if (!c) unknown = true;
        if (c && *c == 0) return Value::boolean(!in.negated);
      }
      return unknown ? Value{} : Value::boolean(in.negated);
    }
    if (e.is<ExistsExpr>()) return Value::boolean(!run(*e.as<ExistsExpr>().query, &lv).rows.empty());
    if (e.is<CaseExpr>()) {
      const auto& c = e.as<CaseExpr>();
      for (const auto& [cond, val] : c.whens) {
        if (is_true(eval(cond, lv, members))) return eval(val, lv, members);
      }
      return c.otherwise ? eval(**c.otherwise, lv, members) : Value{};
    }
    if (e.is<CoalesceExpr>()) {
      for (const auto& a : e.as<CoalesceExpr>().args) {
        Value v = eval(a, lv, members);
        if (!v.is_null()) return v;
      }
      return Value{};
    }
    throw Error(ErrorCode::InvalidQuery, "unsupported in reference evaluator");
  }

  const RefData& data_;
};

}  // namespace tardisp::testing
