#include "tardisp/tracer.hpp"

#include <algorithm>

#include "tardisp/error.hpp"
#include "tardisp/json_codec.hpp"
#include "tardisp/parser.hpp"
#include "tardisp/render.hpp"

namespace tardisp {

std::string query_id_for(StatementId id) { return "Q" + std::to_string(id); }

QueryRegistry QueryRegistry::from_procedure(const ProcedureAst& proc) {
  QueryRegistry reg;
  for_each_statement(proc.body, [&](const Statement& s) {
    if (!s.is<AssignTable>()) return;
    const auto& a = s.as<AssignTable>();
    QueryEntry e{query_id_for(s.id), s.id, a.name, a.query, referenced_variables(a.query)};
    reg.entries_.emplace(e.query_id, std::move(e));
  });
  return reg;
}

const QueryEntry* QueryRegistry::find(const std::string& query_id) const {
  auto it = entries_.find(query_id);
  return it == entries_.end() ? nullptr : &it->second;
}

const QueryEntry& QueryRegistry::at(const std::string& query_id) const {
  if (const auto* e = find(query_id)) return *e;
  throw Error(ErrorCode::MalformedTrace, "unknown query id " + query_id);
}

// ---------------------------------------------------------------------------
// Trace

const TraceEvent* Trace::event_at(LogicalTime step) const {
  if (events.empty() || step < events.front().step || step > events.back().step) return nullptr;
  return &events[step - events.front().step];
}

bool Trace::is_parameter(const std::string& name) const {
  if (!procedure) return false;
  for (const auto& p : procedure->parameters) {
    if (p.name == name) return true;
  }
  return false;
}

const std::vector<LogicalTime>& Trace::assignments(const std::string& var) const {
  static const std::vector<LogicalTime> kNone;
  auto it = assignments_.find(var);
  return it == assignments_.end() ? kNone : it->second;
}

void Trace::index() {
  variables_.clear();
  assignments_.clear();
  if (procedure) {
    for (const auto& [name, is_table] : procedure->variables()) variables_[name] = is_table;
  }
  for (const auto& e : events) {
    if (e.var && (e.kind == StepKind::AssignScalar || e.kind == StepKind::AssignTable)) {
      assignments_[*e.var].push_back(e.step);
    }
  }
}

// ---------------------------------------------------------------------------
// Instrumentation

namespace {

class Instrumenter {
 public:
  explicit Instrumenter(const ProcedureAst& proc) {
    for_each_statement(proc.body, [&](const Statement& s) { next_id_ = std::max(next_id_, s.id); });
  }

  std::vector<Statement> body(const std::vector<Statement>& in) {
    std::vector<Statement> out;
    for (const auto& s : in) {
      if (s.is<DeclareTable>() || (s.is<DeclareScalar>() && !s.as<DeclareScalar>().init)) {
        out.push_back(s);
      } else if (s.is<IfStmt>()) {
        const auto& i = s.as<IfStmt>();
        Statement copy = s;
        IfStmt n{i.condition, {record(s.id)}, {record(s.id)}};
        for (auto& t : body(i.then_body)) n.then_body.push_back(std::move(t));
        for (auto& t : body(i.else_body)) n.else_body.push_back(std::move(t));
        copy.node = std::move(n);
        out.push_back(std::move(copy));
      } else if (s.is<WhileStmt>()) {
        const auto& w = s.as<WhileStmt>();
        Statement copy = s;
        WhileStmt n{w.condition, {record(s.id)}};
        for (auto& t : body(w.body)) n.body.push_back(std::move(t));
        copy.node = std::move(n);
        out.push_back(std::move(copy));
        out.push_back(record(s.id));  // exit test
      } else if (s.is<TraceRecordStmt>()) {
        throw Error(ErrorCode::InvalidQuery, "procedure is already instrumented");
      } else {
        out.push_back(s);
        out.push_back(record(s.id));
      }
    }
    return out;
  }

 private:
  Statement record(StatementId traced) {
    Statement s;
    s.id = ++next_id_;
    s.node = TraceRecordStmt{traced};
    return s;
  }

  StatementId next_id_ = 0;
};

TableDef runs_def() {
  return TableDef{kTraceRunsTable,
                  {{"trace_id", Type::Int},
                   {"procedure", Type::Text},
                   {"source", Type::Text},
                   {"args", Type::Text},
                   {"start_clock", Type::Int},
                   {"end_clock", Type::Int},
                   {"status", Type::Text},
                   {"error_code", Type::Text},
                   {"error", Type::Text},
                   {"error_statement", Type::Int}},
                  {"trace_id"}};
}

TableDef events_def() {
  return TableDef{kTraceEventsTable,
                  {{"trace_id", Type::Int},
                   {"step", Type::Int},
                   {"parent_step", Type::Int},
                   {"statement_id", Type::Int},
                   {"kind", Type::Text},
                   {"var", Type::Text},
                   {"query_id", Type::Text},
                   {"db_time", Type::Int},
                   {"row_count", Type::Int},
                   {"cond", Type::Bool}},
                  {"trace_id", "step"}};
}

TableDef scalars_def() {
  return TableDef{kTraceScalarsTable,
                  {{"trace_id", Type::Int},
                   {"step", Type::Int},
                   {"var", Type::Text},
                   {"value_type", Type::Text},
                   {"bool_value", Type::Bool},
                   {"int_value", Type::Int},
                   {"float_value", Type::Float},
                   {"text_value", Type::Text}},
                  {"trace_id", "step"}};
}

Value opt_int(const std::optional<uint64_t>& v) {
  return v ? Value::integer(static_cast<int64_t>(*v)) : Value{};
}

Value opt_text(const std::optional<std::string>& v) { return v ? Value::text(*v) : Value{}; }

class TraceTableSink : public StepSink {
 public:
  TraceTableSink(TraceId id, StepSink* extra) : id_(id), extra_(extra) {}

  void on_step(const StepRecord& rec, const Environment& env, const Database& db) override {
    if (extra_) extra_->on_step(rec, env, db);
  }

  void on_trace_record(const StepRecord& rec, Database& db) override {
    std::optional<std::string> qid;
    if (rec.kind == StepKind::AssignTable) qid = query_id_for(rec.statement);
    Row ev{Value::integer(id_),
           Value::integer(static_cast<int64_t>(rec.step)),
           rec.parent ? Value::integer(static_cast<int64_t>(*rec.parent)) : Value{},
           Value::integer(rec.statement),
           Value::text(std::string(step_kind_name(rec.kind))),
           opt_text(rec.var),
           opt_text(qid),
           Value::integer(static_cast<int64_t>(rec.step)),
           opt_int(rec.row_count),
           rec.condition ? Value::boolean(*rec.condition) : Value{}};
    db.apply_insert(kTraceEventsTable, std::vector<Row>{std::move(ev)}, rec.step);
    if (rec.kind == StepKind::AssignScalar) {
      const Value& v = *rec.scalar;
      Row sc{Value::integer(id_),         Value::integer(static_cast<int64_t>(rec.step)),
             opt_text(rec.var),           Value::text(std::string(type_name(v.type()))),
             Value{},                     Value{},
             Value{},                     Value{}};
      switch (v.type()) {
        case Type::Bool: sc[4] = v; break;
        case Type::Int: sc[5] = v; break;
        case Type::Float: sc[6] = v; break;
        case Type::Text: sc[7] = v; break;
        case Type::Null: break;
      }
      db.apply_insert(kTraceScalarsTable, std::vector<Row>{std::move(sc)}, rec.step);
    }
  }

 private:
  TraceId id_;
  StepSink* extra_;
};

std::optional<int64_t> int_or_null(const Value& v) {
  if (v.is_null()) return std::nullopt;
  return v.as_int();
}

}  // namespace

ProcedureAst instrument(const ProcedureAst& proc) {
  ProcedureAst out = proc;
  Instrumenter in(proc);
  out.body = in.body(proc.body);
  return out;
}

void ensure_trace_tables(Database& db) {
  for (const auto& def : {runs_def(), events_def(), scalars_def()}) {
    if (!db.has_table(def.name)) db.create_table(def);
  }
}

std::vector<TraceId> list_traces(const Database& db) {
  std::vector<TraceId> ids;
  if (!db.has_table(kTraceRunsTable)) return ids;
  for (const auto& r : db.scan_asof(kTraceRunsTable, db.clock()).rows) ids.push_back(r[0].as_int());
  std::sort(ids.begin(), ids.end());
  return ids;
}

TracedRun run_traced(const ProcedureAst& proc, const std::string& source, const Environment& args, Database& db,
                     ExecutionConfig cfg, StepSink* extra) {
  ensure_trace_tables(db);
  TracedRun out;
  {
    auto ids = list_traces(db);
    out.trace_id = ids.empty() ? 1 : ids.back() + 1;
  }
  ProcedureAst inst = instrument(proc);
  TraceTableSink sink(out.trace_id, extra);
  cfg.tracing = true;
  LogicalTime start = db.clock();
  Json args_json = Json::object();
  try {
    args_json = environment_to_json(bind_arguments(proc, args));
    out.result = run(inst, args, db, cfg, &sink);
  } catch (const Error& e) {
    out.error = e;
  }

  auto lock = db.acquire_writer();
  Row run_row{Value::integer(out.trace_id),
              Value::text(proc.name),
              Value::text(source),
              Value::text(args_json.dump()),
              Value::integer(static_cast<int64_t>(start)),
              Value::integer(static_cast<int64_t>(db.clock())),
              Value::text(out.error ? "failed" : "ok"),
              out.error ? Value::text(std::string(error_code_name(out.error->code()))) : Value{},
              out.error ? Value::text(out.error->what()) : Value{},
              out.error && out.error->statement_id() ? Value::integer(*out.error->statement_id()) : Value{}};
  db.apply_insert(kTraceRunsTable, std::vector<Row>{std::move(run_row)}, db.clock());
  return out;
}

Trace load_trace(const Database& db, TraceId trace_id) {
  if (!db.has_table(kTraceRunsTable)) throw Error(ErrorCode::MalformedTrace, "database holds no traces");
  LogicalTime now = db.clock();
  Trace t;
  t.trace_id = trace_id;
  bool found = false;
  for (const auto& r : db.scan_asof(kTraceRunsTable, now).rows) {
    if (r[0].as_int() != trace_id) continue;
    found = true;
    t.procedure_name = r[1].as_text();
    t.source = r[2].as_text();
    t.args = environment_from_json(Json::parse(r[3].as_text()));
    t.start_clock = static_cast<LogicalTime>(r[4].as_int());
    t.end_clock = static_cast<LogicalTime>(r[5].as_int());
    if (r[6].as_text() != "ok") {
      t.error_code = r[7].is_null() ? std::string("Error") : r[7].as_text();
      t.error = r[8].is_null() ? std::string() : r[8].as_text();
      if (auto s = int_or_null(r[9])) t.error_statement = static_cast<StatementId>(*s);
    }
  }
  if (!found) throw Error(ErrorCode::MalformedTrace, "no trace with id " + std::to_string(trace_id));
  t.procedure = std::make_shared<const ProcedureAst>(parse_procedure(t.source));

  std::map<LogicalTime, Value> scalars;
  for (const auto& r : db.scan_asof(kTraceScalarsTable, now).rows) {
    if (r[0].as_int() != trace_id) continue;
    auto type = parse_type_name(r[3].as_text());
    Value v;
    if (type == Type::Bool) v = r[4];
    if (type == Type::Int) v = r[5];
    if (type == Type::Float) v = r[6];
    if (type == Type::Text) v = r[7];
    scalars[static_cast<LogicalTime>(r[1].as_int())] = v;
  }

  for (const auto& r : db.scan_asof(kTraceEventsTable, now).rows) {
    if (r[0].as_int() != trace_id) continue;
    TraceEvent e;
    e.step = static_cast<LogicalTime>(r[1].as_int());
    if (auto p = int_or_null(r[2])) e.parent_step = static_cast<LogicalTime>(*p);
    e.statement_id = static_cast<StatementId>(r[3].as_int());
    auto kind = parse_step_kind(r[4].as_text());
    if (!kind) throw Error(ErrorCode::MalformedTrace, "unknown event kind " + r[4].as_text());
    e.kind = *kind;
    if (!r[5].is_null()) e.var = r[5].as_text();
    if (!r[6].is_null()) e.query_id = r[6].as_text();
    e.db_time = static_cast<LogicalTime>(r[7].as_int());
    if (auto n = int_or_null(r[8])) e.row_count = static_cast<uint64_t>(*n);
    if (!r[9].is_null()) e.condition = r[9].as_bool();
    if (e.kind == StepKind::AssignScalar) {
      auto it = scalars.find(e.step);
      if (it == scalars.end()) {
        throw Error(ErrorCode::MalformedTrace, "scalar assignment at step " + std::to_string(e.step) + " has no value");
      }
      e.scalar_value = it->second;
    }
    if (e.kind == StepKind::AssignTable && (!e.query_id || !e.row_count)) {
      throw Error(ErrorCode::MalformedTrace, "table assignment at step " + std::to_string(e.step) + " lacks query");
    }
    if ((e.kind == StepKind::AssignScalar || e.kind == StepKind::AssignTable) && !e.var) {
      throw Error(ErrorCode::MalformedTrace, "assignment at step " + std::to_string(e.step) + " names no variable");
    }
    t.events.push_back(std::move(e));
  }
  std::sort(t.events.begin(), t.events.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    if (t.events[i].step != t.start_clock + 1 + i) {
      throw Error(ErrorCode::MalformedTrace, "trace steps are not contiguous at step " +
                                                 std::to_string(t.events[i].step));
    }
  }
  ExecutionTree::build(t.events);  // validates parents
  t.index();
  return t;
}

// ---------------------------------------------------------------------------
// Emitted views

namespace {

std::string view_step(const char* param) { return std::string(":") + param + " - 1"; }

std::string scalar_column(Type t) {
  switch (t) {
    case Type::Bool: return "bool_value";
    case Type::Float: return "float_value";
    case Type::Text: return "text_value";
    default: return "int_value";
  }
}

std::string last_assignment(const std::string& var, const char* step) {
  return "(SELECT MAX(e.step) FROM TRACE_EVENTS e WHERE e.trace_id = :trace AND e.var = " +
         to_sql_literal(Value::text(var)) + " AND e.step <= :" + step + ")";
}

}  // namespace

std::string emit_reconstruction_views(const ProcedureAst& proc) {
  std::map<std::string, Type> scalar_types;
  std::map<std::string, bool> params;
  for (const auto& p : proc.parameters) {
    params[p.name] = true;
    if (!p.is_table) scalar_types[p.name] = p.type;
  }
  for_each_statement(proc.body, [&](const Statement& s) {
    if (s.is<DeclareScalar>()) scalar_types[s.as<DeclareScalar>().name] = s.as<DeclareScalar>().type;
  });

  RenderOptions opts;
  opts.variable_source = [](const std::string& v) -> std::optional<std::string> {
    return "V_" + v + "__MASTER(" + view_step("at") + ")";
  };
  opts.variable_expr = [](const std::string& v) -> std::optional<std::string> {
    return "S_" + v + "(" + view_step("at") + ")";
  };

  std::string out = "-- reconstruction views for procedure " + proc.name + "\n";
  out += "-- :trace is the trace id, :step the requested step, :at the step of an assignment\n";
  for (const auto& [name, is_table] : proc.variables()) {
    out += "\n";
    bool is_param = params.count(name) != 0;
    if (!is_table) {
      out += "-- " + name + ": scalar" + (is_param ? " parameter" : " variable") + "\n";
      out += "CREATE VIEW S_" + name + " (step) AS\n";
      out += "  SELECT s." + scalar_column(scalar_types[name]) + " FROM TRACE_SCALARS s WHERE s.trace_id = :trace AND s.step = " +
             last_assignment(name, "step") + ";\n";
      if (is_param) out += "-- before its first assignment S_" + name + " is the call argument from TRACE_RUNS.args\n";
      continue;
    }
    std::vector<const Statement*> sites;
    for_each_statement(proc.body, [&](const Statement& s) {
      if (s.is<AssignTable>() && s.as<AssignTable>().name == name) sites.push_back(&s);
    });
    out += "-- " + name + ": table" + (is_param ? " parameter" : " variable") + ", " + std::to_string(sites.size()) +
           " assignment site" + (sites.size() == 1 ? "" : "s") + "\n";
    for (const auto* s : sites) {
      out += "CREATE VIEW V_" + name + "_" + std::to_string(s->id) + " (at) AS\n  ";
      out += render_query(s->as<AssignTable>().query, opts) + " AT STEP :at;\n";
    }
    out += "CREATE VIEW V_" + name + "__MASTER (step) AS\n";
    std::vector<std::string> branches;
    if (is_param) branches.push_back("  SELECT * FROM TRACE_RUNS.args." + name + " WHERE :a IS NULL");
    for (const auto* s : sites) {
      std::string id = std::to_string(s->id);
      branches.push_back("  SELECT * FROM V_" + name + "_" + id +
                         "(:a) WHERE (SELECT e.statement_id FROM TRACE_EVENTS e WHERE e.trace_id = :trace AND e.step = "
                         ":a) = " + id);
    }
    if (branches.empty()) branches.push_back("  SELECT * FROM V_" + name + "_NONE WHERE FALSE");
    for (std::size_t i = 0; i < branches.size(); ++i) {
      if (i) out += "  UNION ALL\n";
      out += branches[i] + "\n";
    }
    out += "  WITH :a = " + last_assignment(name, "step") + ";\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

Reconstructor::Reconstructor(const Trace& trace, const QueryRegistry& registry, const Database& db)
    : trace_(trace), registry_(registry), db_(db) {}

void Reconstructor::check_known(const std::string& var) const {
  if (!trace_.variables().count(var)) throw Error(ErrorCode::UnknownVariable, "no variable named " + var);
}

std::optional<LogicalTime> Reconstructor::governing_step(const std::string& var, LogicalTime step) const {
  check_known(var);
  const auto& a = trace_.assignments(var);
  auto it = std::upper_bound(a.begin(), a.end(), step);
  if (it != a.begin()) return *std::prev(it);
  if (trace_.is_parameter(var) && step >= trace_.start_clock) return trace_.start_clock;
  return std::nullopt;
}

Value Reconstructor::scalar(const std::string& var, LogicalTime step) const {
  check_known(var);
  if (trace_.variables().at(var)) throw Error(ErrorCode::TypeMismatch, var + " is a table variable");
  auto g = governing_step(var, step);
  if (!g) throw Error(ErrorCode::UnboundAtStep, var + " is not assigned at step " + std::to_string(step));
  if (const auto* e = trace_.event_at(*g); e && e->var == var) return *e->scalar_value;
  return trace_.args.scalar(var);
}

TableBinding Reconstructor::table(const std::string& var, LogicalTime step) const {
  check_known(var);
  if (!trace_.variables().at(var)) throw Error(ErrorCode::TypeMismatch, var + " is a scalar variable");
  auto g = governing_step(var, step);
  if (!g) throw Error(ErrorCode::UnboundAtStep, var + " is not assigned at step " + std::to_string(step));
  const auto* e = trace_.event_at(*g);
  if (!e || e->var != var) return trace_.args.table(var);
  return table_for_event(*e);
}

Binding Reconstructor::value(const std::string& var, LogicalTime step) const {
  check_known(var);
  if (trace_.variables().at(var)) return table(var, step);
  return scalar(var, step);
}

// Resolves the assignment at `e` without recursion: a work stack of
// assignment steps whose argument tables are not memoized yet.
TableBinding Reconstructor::table_for_event(const TraceEvent& root) const {
  std::lock_guard lock(memo_mutex_);
  if (auto it = memo_.find(root.step); it != memo_.end()) return it->second;
  std::vector<LogicalTime> work{root.step};
  while (!work.empty()) {
    LogicalTime s = work.back();
    if (memo_.count(s)) {
      work.pop_back();
      continue;
    }
    const TraceEvent& e = *trace_.event_at(s);
    const QueryEntry& q = registry_.at(*e.query_id);
    bool pending = false;
    for (const auto& arg : q.arguments) {
      if (!trace_.variables().count(arg) || !trace_.variables().at(arg)) continue;
      auto g = governing_step(arg, s - 1);
      const TraceEvent* ge = g ? trace_.event_at(*g) : nullptr;
      if (ge && ge->var == arg && !memo_.count(*g)) {
        work.push_back(*g);
        pending = true;
      }
    }
    if (pending) continue;
    Environment env;
    for (const auto& arg : q.arguments) {
      check_known(arg);
      auto g = governing_step(arg, s - 1);
      if (!g) continue;  // evaluation reports UnboundVariable, as the run did
      if (trace_.variables().at(arg)) {
        const TraceEvent* ge = trace_.event_at(*g);
        env.set_table(arg, ge && ge->var == arg ? memo_.at(*g) : trace_.args.table(arg));
      } else {
        env.set_scalar(arg, scalar(arg, s - 1));
      }
    }
    memo_[s] = std::make_shared<const Relation>(evaluate(q.query, env, db_, e.db_time));
    work.pop_back();
  }
  return memo_.at(root.step);
}

std::vector<std::string> Reconstructor::in_scope(LogicalTime step) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : trace_.variables()) {
    if (governing_step(name, step)) out.push_back(name);
  }
  return out;
}

Environment Reconstructor::environment_at(LogicalTime step) const {
  Environment env;
  for (const auto& name : in_scope(step)) {
    auto b = value(name, step);
    if (std::holds_alternative<Value>(b)) {
      env.set_scalar(name, std::get<Value>(b));
    } else {
      env.set_table(name, std::get<TableBinding>(b));
    }
  }
  return env;
}

std::optional<LogicalTime> assignment_nav(const Trace& trace, const std::string& var, LogicalTime step,
                                          NavDirection dir) {
  if (!trace.variables().count(var)) throw Error(ErrorCode::UnknownVariable, "no variable named " + var);
  const auto& a = trace.assignments(var);
  if (dir == NavDirection::Prev) {
    auto it = std::lower_bound(a.begin(), a.end(), step);
    if (it == a.begin()) return std::nullopt;
    return *std::prev(it);
  }
  auto it = std::upper_bound(a.begin(), a.end(), step);
  if (it == a.end()) return std::nullopt;
  return *it;
}

// ---------------------------------------------------------------------------
// Execution tree

ExecutionTree ExecutionTree::build(const std::vector<TraceEvent>& events) {
  ExecutionTree t;
  t.nodes_ = events;
  t.children_.resize(events.size());
  if (events.empty()) return t;
  t.first_ = events.front().step;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.step != t.first_ + i) {
      throw Error(ErrorCode::MalformedTrace, "gap in trace before step " + std::to_string(e.step));
    }
    if (!e.parent_step) {
      t.roots_.push_back(e.step);
      continue;
    }
    LogicalTime p = *e.parent_step;
    if (p >= e.step || p < t.first_) {
      throw Error(ErrorCode::MalformedTrace,
                  "step " + std::to_string(e.step) + " has invalid parent " + std::to_string(p));
    }
    const auto& pe = events[p - t.first_];
    if (pe.kind != StepKind::Branch && pe.kind != StepKind::LoopIter) {
      throw Error(ErrorCode::MalformedTrace, "parent of step " + std::to_string(e.step) + " is not a control step");
    }
    t.children_[p - t.first_].push_back(e.step);
  }
  return t;
}

bool ExecutionTree::contains(LogicalTime step) const {
  return !nodes_.empty() && step >= first_ && step - first_ < nodes_.size();
}

const TraceEvent& ExecutionTree::node(LogicalTime step) const {
  if (!contains(step)) throw Error(ErrorCode::UnknownStep, "no step " + std::to_string(step));
  return nodes_[step - first_];
}

const std::vector<LogicalTime>& ExecutionTree::children(LogicalTime step) const {
  node(step);
  return children_[step - first_];
}

std::optional<LogicalTime> ExecutionTree::parent(LogicalTime step) const { return node(step).parent_step; }

std::optional<LogicalTime> ExecutionTree::next_sibling(LogicalTime step) const {
  auto p = parent(step);
  const auto& sibs = p ? children(*p) : roots_;
  auto it = std::upper_bound(sibs.begin(), sibs.end(), step);
  if (it == sibs.end()) return std::nullopt;
  return *it;
}

}  // namespace tardisp
