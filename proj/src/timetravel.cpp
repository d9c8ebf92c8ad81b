#include "tardisp/timetravel.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>

#include "tardisp/error.hpp"
#include "tardisp/parser.hpp"
#include "tardisp/render.hpp"

namespace tardisp {

LogicalTime check_step(const Trace& trace, uint64_t step) {
  if (step > trace.last_step()) {
    throw Error(ErrorCode::UnknownStep, "step " + std::to_string(step) + " is outside the trace (0.." +
                                            std::to_string(trace.last_step()) + ")");
  }
  return step;
}

namespace {

bool has_qualifier(const Expr& e) {
  bool found = false;
  visit_expr(
      e, [&](const Expr& x) { found = found || x.is<QualifiedColumnRef>(); }, true);
  return found;
}

bool query_has_qualifier(const QueryAst& q) {
  bool found = false;
  visit_query_exprs(
      q, [&](const Expr& x) { found = found || x.is<QualifiedColumnRef>(); }, true);
  return found;
}

void split_and(const Expr& e, std::vector<Expr>& out) {
  if (e.is<BinaryExpr>() && e.as<BinaryExpr>().op == BinaryOp::And) {
    split_and(*e.as<BinaryExpr>().lhs, out);
    split_and(*e.as<BinaryExpr>().rhs, out);
  } else {
    out.push_back(e);
  }
}

std::optional<Expr> join_and(std::vector<Expr> parts) {
  if (parts.empty()) return std::nullopt;
  Expr acc = std::move(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) acc = make_binary(BinaryOp::And, std::move(acc), std::move(parts[i]));
  return acc;
}

// Rewrites every QualifiedColumnRef through `f`. Does not enter subqueries.
void map_qualified(Expr& e, const std::function<Expr(const QualifiedColumnRef&)>& f) {
  std::visit(
      [&](auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, QualifiedColumnRef>) {
          e = f(node);
        } else if constexpr (std::is_same_v<T, UnaryExpr>) {
          map_qualified(*node.operand, f);
        } else if constexpr (std::is_same_v<T, BinaryExpr>) {
          map_qualified(*node.lhs, f);
          map_qualified(*node.rhs, f);
        } else if constexpr (std::is_same_v<T, IsNullExpr>) {
          map_qualified(*node.operand, f);
        } else if constexpr (std::is_same_v<T, InListExpr>) {
          map_qualified(*node.operand, f);
          for (auto& i : node.items) map_qualified(i, f);
        } else if constexpr (std::is_same_v<T, AggregateExpr>) {
          if (node.arg) map_qualified(**node.arg, f);
        } else if constexpr (std::is_same_v<T, CaseExpr>) {
          for (auto& [c, v] : node.whens) {
            map_qualified(c, f);
            map_qualified(v, f);
          }
          if (node.otherwise) map_qualified(**node.otherwise, f);
        } else if constexpr (std::is_same_v<T, CoalesceExpr>) {
          for (auto& a : node.args) map_qualified(a, f);
        }
      },
      e.node);
}

Environment bind_variables(const QueryAst& q, const Reconstructor& rc, LogicalTime step) {
  Environment env;
  for (const auto& name : referenced_variables(q)) {
    auto b = rc.value(name, step);
    if (std::holds_alternative<Value>(b)) {
      env.set_scalar(name, std::get<Value>(b));
    } else {
      env.set_table(name, std::get<TableBinding>(b));
    }
  }
  return env;
}

struct RowLess {
  bool operator()(const Row& a, const Row& b) const { return compare_rows(a, b) < 0; }
};

bool is_pk_origin(const Database& db, const std::optional<ColumnOrigin>& o) {
  return o && db.has_table(o->table) && db.table_def(o->table).is_key_column(o->column);
}

// Change times of the logical row `pk` in (lo, hi], ascending.
std::vector<LogicalTime> change_times(const Database& db, std::string_view table, const Row& pk,
                                      std::string_view column, LogicalTime lo, LogicalTime hi) {
  const TableDef& def = db.table_def(table);
  auto col = def.column_index(column);
  if (!col) throw Error(ErrorCode::UnknownColumn, "no column " + std::string(column) + " in " + std::string(table));
  auto versions = db.key_versions(table, pk);
  std::stable_sort(versions.begin(), versions.end(),
                   [](const auto& a, const auto& b) { return a.valid_from < b.valid_from; });
  std::vector<LogicalTime> out;
  for (std::size_t i = 0; i < versions.size(); ++i) {
    const auto& v = versions[i];
    if (v.valid_from == v.valid_to) continue;  // replaced within its own statement
    const TupleVersion* pred = nullptr;
    for (const auto& p : versions) {
      if (&p != &v && p.valid_to == v.valid_from && p.valid_from < p.valid_to) pred = &p;
    }
    if (v.valid_from > lo && v.valid_from <= hi && (!pred || !(pred->values[*col] == v.values[*col]))) {
      out.push_back(v.valid_from);
    }
    if (v.valid_to != kEndOfTime && v.valid_to > lo && v.valid_to <= hi) {
      bool continued = false;
      for (const auto& n : versions) continued = continued || (n.valid_from == v.valid_to && n.valid_from < n.valid_to);
      if (!continued) out.push_back(v.valid_to);  // row disappeared
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

RewrittenQuery rewrite_at_step(const QueryAst& q, const Reconstructor& rc) {
  if (!q.at_step || !q.at_step->is_single()) {
    throw Error(ErrorCode::InvalidQuery, "query needs a single AT STEP clause");
  }
  if (query_has_qualifier(q)) {
    throw Error(ErrorCode::InvalidTimeDiff, "time qualifiers need a named AT STEP clause");
  }
  RewrittenQuery out;
  out.at = check_step(rc.trace(), q.at_step->single());
  out.query = q;
  out.query.at_step.reset();
  out.env = bind_variables(out.query, rc, out.at);
  return out;
}

Relation execute_at_step(const QueryAst& q, const Reconstructor& rc) {
  auto r = rewrite_at_step(q, rc);
  return evaluate(r.query, r.env, rc.db(), r.at);
}

std::optional<LogicalTime> find_change_origin(const Database& db, std::string_view table, const Row& pk,
                                              std::string_view column, LogicalTime t_low, LogicalTime t_high) {
  if (t_low >= t_high) throw Error(ErrorCode::InvalidQuery, "change window must have t_low < t_high");
  auto t = change_times(db, table, pk, column, t_low, t_high);
  if (t.empty()) return std::nullopt;
  return t.front();
}

std::optional<LogicalTime> find_last_change(const Database& db, std::string_view table, const Row& pk,
                                            std::string_view column, LogicalTime t_low, LogicalTime t_high) {
  if (t_low >= t_high) throw Error(ErrorCode::InvalidQuery, "change window must have t_low < t_high");
  auto t = change_times(db, table, pk, column, t_low, t_high);
  if (t.empty()) return std::nullopt;
  return t.back();
}

QueryAst partial_query(const QueryAst& q, LogicalTime step) {
  QueryAst out = q;
  std::vector<Expr> conjuncts, plain;
  if (q.where) split_and(*q.where, conjuncts);
  for (auto& c : conjuncts) {
    if (!has_qualifier(c)) plain.push_back(std::move(c));
  }
  out.where = join_and(std::move(plain));
  for (auto& item : out.select) {
    if (item.expr) map_qualified(*item.expr, [](const QualifiedColumnRef& r) { return Expr{r.column}; });
  }
  out.at_step = AtStepClause{step};
  return out;
}

DiffTable execute_time_diff(const QueryAst& q, const Reconstructor& rc) {
  if (!q.at_step || q.at_step->is_single()) throw Error(ErrorCode::InvalidTimeDiff, "query needs named steps");
  const auto& named = q.at_step->named();
  if (named.size() < 2) throw Error(ErrorCode::InvalidTimeDiff, "a time-diff needs at least two named steps");
  if (q.limit || !q.order_by.empty()) throw Error(ErrorCode::InvalidTimeDiff, "LIMIT and ORDER BY are not supported in a time-diff");
  const Database& db = rc.db();

  std::map<std::string, std::size_t> step_index;
  DiffTable out;
  for (const auto& n : named) {
    step_index[n.name] = out.steps.size();
    out.step_names.push_back(n.name);
    out.steps.push_back(check_step(rc.trace(), n.step));
  }

  // Qualifiers may appear in the select list (stripped) and in WHERE conjuncts.
  for (const auto& j : q.joins) {
    if (has_qualifier(j.on)) throw Error(ErrorCode::InvalidTimeDiff, "time qualifiers are not allowed in ON");
  }
  std::vector<Expr> conjuncts, timed;
  if (q.where) split_and(*q.where, conjuncts);
  for (auto& c : conjuncts) {
    if (has_qualifier(c)) timed.push_back(std::move(c));
  }

  QueryAst base = partial_query(q, 0);
  base.at_step.reset();
  const std::size_t visible = base.select.size();
  const bool grouped = !q.group_by.empty();
  auto in_group_by = [&](const ColumnRef& c) {
    return std::any_of(q.group_by.begin(), q.group_by.end(), [&](const Expr& g) { return g == Expr{c}; });
  };

  // Hidden output columns: one per distinct qualified reference, one per
  // unselected GROUP BY column.
  std::vector<ColumnRef> hidden_refs;
  auto hidden_index = [&](const ColumnRef& c) -> std::size_t {
    for (std::size_t i = 0; i < hidden_refs.size(); ++i) {
      if (hidden_refs[i] == c) return i;
    }
    hidden_refs.push_back(c);
    return hidden_refs.size() - 1;
  };
  for (const auto& c : timed) {
    visit_expr(
        c,
        [&](const Expr& x) {
          if (x.is<ColumnRef>()) {
            throw Error(ErrorCode::InvalidTimeDiff, "column " + render_expr(x) +
                                                        " in a time-specific condition needs a step qualifier");
          }
          if (x.is<VariableRef>() || x.is<ExistsExpr>()) {
            throw Error(ErrorCode::InvalidTimeDiff, "time-specific conditions may only use qualified columns");
          }
          if (x.is<QualifiedColumnRef>()) {
            const auto& r = x.as<QualifiedColumnRef>();
            if (!step_index.count(r.step_name)) {
              throw Error(ErrorCode::UnknownStepName, "no step named " + r.step_name);
            }
            if (grouped && !in_group_by(r.column)) {
              throw Error(ErrorCode::InvalidTimeDiff, render_expr(Expr{r.column}) + " must be grouped to be compared across steps");
            }
            hidden_index(r.column);
          }
        },
        false);
  }
  visit_query_exprs(
      q,
      [&](const Expr& x) {
        if (x.is<QualifiedColumnRef>() && !step_index.count(x.as<QualifiedColumnRef>().step_name)) {
          throw Error(ErrorCode::UnknownStepName, "no step named " + x.as<QualifiedColumnRef>().step_name);
        }
      },
      true);

  // Key candidates, as output indices.
  std::vector<std::size_t> group_cols;
  std::size_t n_hidden_refs = hidden_refs.size();
  std::vector<ColumnRef> hidden_groups;
  if (grouped) {
    for (const auto& g : q.group_by) {
      std::optional<std::size_t> found;
      for (std::size_t i = 0; i < visible && !found; ++i) {
        if (base.select[i].expr && *base.select[i].expr == g) found = i;
      }
      if (!found) {
        hidden_groups.push_back(g.as<ColumnRef>());
        found = visible + n_hidden_refs + hidden_groups.size() - 1;
      }
      group_cols.push_back(*found);
    }
  }
  for (std::size_t i = 0; i < hidden_refs.size(); ++i) {
    base.select.push_back(SelectItem{Expr{hidden_refs[i]}, std::nullopt, "#q" + std::to_string(i)});
  }
  for (std::size_t i = 0; i < hidden_groups.size(); ++i) {
    base.select.push_back(SelectItem{Expr{hidden_groups[i]}, std::nullopt, "#g" + std::to_string(i)});
  }
  validate_query(base);

  // k partial results.
  std::vector<Relation> partials;
  for (auto s : out.steps) {
    Environment env = bind_variables(base, rc, s);
    partials.push_back(evaluate(base, env, db, s));
  }
  const Relation& shape = partials.front();
  const std::size_t total_cols = shape.arity();
  const std::size_t first_hidden = total_cols - hidden_refs.size() - hidden_groups.size();

  std::vector<std::size_t> key_cols;
  if (grouped) {
    for (auto i : group_cols) {
      if (is_pk_origin(db, shape.columns[i].origin)) key_cols.push_back(i);
    }
    if (key_cols.empty()) key_cols = group_cols;
  } else {
    for (std::size_t i = 0; i < first_hidden; ++i) {
      if (is_pk_origin(db, shape.columns[i].origin)) key_cols.push_back(i);
    }
  }
  if (key_cols.empty()) throw Error(ErrorCode::NoKeyColumns, "the time-diff query selects no key columns");

  for (auto i : key_cols) out.key_columns.push_back(shape.columns[i].name);
  std::vector<std::size_t> value_cols;
  for (std::size_t i = 0; i < first_hidden; ++i) {
    if (std::find(key_cols.begin(), key_cols.end(), i) == key_cols.end()) {
      value_cols.push_back(i);
      out.value_columns.push_back(shape.columns[i].name);
    }
  }

  // Full outer join on the key.
  const std::size_t k = partials.size();
  std::map<Row, std::vector<const Row*>, RowLess> joined;
  for (std::size_t s = 0; s < k; ++s) {
    for (const auto& row : partials[s].rows) {
      Row key;
      for (auto i : key_cols) key.push_back(row[i]);
      auto& slot = joined.try_emplace(std::move(key), std::vector<const Row*>(k, nullptr)).first->second;
      if (slot[s]) {
        throw Error(ErrorCode::DiffKeyNotUnique, "key (" + render_expr(make_literal(row[key_cols[0]])) +
                                                     ", ...) repeats in the result at step " + out.step_names[s]);
      }
      slot[s] = &row;
    }
  }

  // Lookup of qualified references: (step, hidden column) per occurrence.
  auto column_of = [&](const ColumnRef& c) { return first_hidden + hidden_index(c); };

  // Primary-key columns of each attributable value column's source.
  struct Attribution {
    std::string table;
    std::string column;
    std::vector<std::size_t> pk_cols;
  };
  std::vector<std::optional<Attribution>> attrib(value_cols.size());
  for (std::size_t v = 0; v < value_cols.size(); ++v) {
    const auto& o = shape.columns[value_cols[v]].origin;
    if (!o || o->via_variable || !db.has_table(o->table)) continue;
    const TableDef& def = db.table_def(o->table);
    Attribution a{o->table, o->column, {}};
    for (const auto& pk : def.primary_key) {
      for (std::size_t i = 0; i < total_cols; ++i) {
        const auto& oi = shape.columns[i].origin;
        if (oi && !oi->via_variable && oi->table == o->table && oi->column == pk && oi->source == o->source) {
          a.pk_cols.push_back(i);
          break;
        }
      }
    }
    if (a.pk_cols.size() == def.primary_key.size()) attrib[v] = std::move(a);
  }

  // Time conjuncts, compiled once: each qualified reference becomes a
  // variable bound per joined row.
  struct Slot {
    std::string var;
    std::size_t step;
    std::size_t column;
  };
  std::vector<std::pair<Expr, std::vector<Slot>>> compiled;
  for (const auto& c : timed) {
    std::vector<Slot> slots;
    Expr e = c;
    map_qualified(e, [&](const QualifiedColumnRef& r) {
      Slot s{"#" + std::to_string(slots.size()), step_index.at(r.step_name), column_of(r.column)};
      slots.push_back(s);
      return make_variable(s.var);
    });
    compiled.emplace_back(std::move(e), std::move(slots));
  }

  Environment row_env;
  for (const auto& [key, slots] : joined) {
    bool keep = true;
    for (const auto& [expr, refs] : compiled) {
      for (const auto& r : refs) {
        if (!slots[r.step]) {
          keep = false;  // ABSENT at a referenced step
          break;
        }
        row_env.set_scalar(r.var, (*slots[r.step])[r.column]);
      }
      if (!keep) break;
      Value v = evaluate_scalar(expr, row_env, db, out.steps.front());
      if (!v.is_null() && v.type() != Type::Bool) throw Error(ErrorCode::TypeMismatch, "condition is not boolean");
      if (v.is_null() || !v.as_bool()) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;

    DiffRow dr{key, {}};
    for (std::size_t v = 0; v < value_cols.size(); ++v) {
      DiffCell cell;
      for (std::size_t s = 0; s < k; ++s) {
        cell.values.push_back(slots[s] ? std::optional<Value>((*slots[s])[value_cols[v]]) : std::nullopt);
      }
      for (std::size_t s = 0; s + 1 < k; ++s) {
        const auto& a = cell.values[s];
        const auto& b = cell.values[s + 1];
        bool changed = (a.has_value() != b.has_value()) || (a && b && !(*a == *b));
        cell.changed_from_prev.push_back(changed);
        std::optional<LogicalTime> jump;
        if (changed && attrib[v]) {
          const Row* src = slots[s + 1] ? slots[s + 1] : slots[s];
          Row pk;
          for (auto i : attrib[v]->pk_cols) pk.push_back((*src)[i]);
          LogicalTime lo = std::min(out.steps[s], out.steps[s + 1]);
          LogicalTime hi = std::max(out.steps[s], out.steps[s + 1]);
          if (lo < hi) jump = find_last_change(db, attrib[v]->table, pk, attrib[v]->column, lo, hi);
        }
        cell.pair_jump_steps.push_back(jump);
        if (jump) cell.jump_step = jump;
      }
      dr.cells.push_back(std::move(cell));
    }
    out.rows.push_back(std::move(dr));
  }
  return out;
}

namespace {

// First keyword of the text, upper-cased, skipping blanks and -- comments.
std::string leading_keyword(std::string_view text) {
  std::size_t i = 0;
  for (;;) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (text.substr(i, 2) == "--") {
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    break;
  }
  std::string word;
  while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) {
    word.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(text[i++]))));
  }
  return word;
}

}  // namespace

ConsoleResult console_query(std::string_view text, const Reconstructor& rc, LogicalTime cursor) {
  auto kw = leading_keyword(text);
  if (kw == "INSERT" || kw == "UPDATE" || kw == "DELETE" || kw == "CREATE" || kw == "DROP") {
    throw Error(ErrorCode::ReadOnlyConsole, "the console is read-only; " + kw + " is not allowed");
  }
  QueryAst q = parse_query(text);
  if (!q.at_step) q.at_step = AtStepClause{cursor};
  if (q.at_step->is_single()) return execute_at_step(q, rc);
  return execute_time_diff(q, rc);
}

}  // namespace tardisp
