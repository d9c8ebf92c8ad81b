#include "tardisp/runtime.hpp"

#include <map>
#include <vector>

#include "tardisp/error.hpp"

namespace tardisp {

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::AssignScalar: return "AssignScalar";
    case StepKind::AssignTable: return "AssignTable";
    case StepKind::Dml: return "Dml";
    case StepKind::Branch: return "Branch";
    case StepKind::LoopIter: return "LoopIter";
  }
  return "?";
}

std::optional<StepKind> parse_step_kind(std::string_view name) {
  for (auto k : {StepKind::AssignScalar, StepKind::AssignTable, StepKind::Dml, StepKind::Branch, StepKind::LoopIter}) {
    if (step_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

Environment bind_arguments(const ProcedureAst& proc, const Environment& args) {
  Environment env;
  for (const auto& p : proc.parameters) {
    const Binding* b = args.find(p.name);
    if (!b) throw Error(ErrorCode::InvalidQuery, "missing argument for parameter " + p.name);
    if (p.is_table) {
      if (!std::holds_alternative<TableBinding>(*b)) {
        throw Error(ErrorCode::TypeMismatch, "parameter " + p.name + " expects a table");
      }
      env.set_table(p.name, *std::get<TableBinding>(*b));  // snapshot
    } else {
      if (!std::holds_alternative<Value>(*b)) {
        throw Error(ErrorCode::TypeMismatch, "parameter " + p.name + " expects a scalar");
      }
      auto v = coerce_to(std::get<Value>(*b), p.type);
      if (!v) {
        throw Error(ErrorCode::TypeMismatch, "argument " + to_sql_literal(std::get<Value>(*b)) + " does not fit " +
                                                 std::string(type_name(p.type)) + " parameter " + p.name);
      }
      env.set_scalar(p.name, *v);
    }
  }
  for (const auto& [name, _] : args.bindings()) {
    if (!env.contains(name)) throw Error(ErrorCode::InvalidQuery, "no parameter named " + name);
  }
  return env;
}

namespace {

class Interpreter {
 public:
  Interpreter(const ProcedureAst& proc, Database& db, const ExecutionConfig& cfg, StepSink* sink)
      : db_(db), cfg_(cfg), sink_(sink) {
    for_each_statement(proc.body, [&](const Statement& s) {
      if (s.is<DeclareScalar>()) types_[s.as<DeclareScalar>().name] = s.as<DeclareScalar>().type;
    });
    for (const auto& p : proc.parameters) {
      if (!p.is_table) types_[p.name] = p.type;
    }
  }

  void exec_block(const std::vector<Statement>& body) {
    for (const auto& s : body) exec(s);
  }

  Environment env;
  uint64_t steps = 0;

 private:
  LogicalTime tick() {
    if (steps >= cfg_.max_steps) {
      throw Error(ErrorCode::StepLimitExceeded, "step limit of " + std::to_string(cfg_.max_steps) + " reached");
    }
    ++steps;
    return db_.advance_clock();
  }

  StepRecord record(LogicalTime t, const Statement& s, StepKind kind) {
    StepRecord r;
    r.step = t;
    if (!parents_.empty()) r.parent = parents_.back();
    r.statement = s.id;
    r.kind = kind;
    return r;
  }

  void finish(const StepRecord& r) {
    last_ = r;
    if (sink_) sink_->on_step(r, env, db_);
  }

  Value checked_scalar(const std::string& name, Value v) {
    auto it = types_.find(name);
    if (it == types_.end()) return v;
    auto c = coerce_to(v, it->second);
    if (!c) {
      throw Error(ErrorCode::TypeMismatch, "value " + to_sql_literal(v) + " does not fit " +
                                               std::string(type_name(it->second)) + " variable " + name);
    }
    return *c;
  }

  Value single_cell(const QueryAst& q, LogicalTime t) {
    Relation rel = evaluate(q, env, db_, t);
    if (rel.arity() != 1) {
      throw Error(ErrorCode::InvalidQuery, "scalar assignment needs a single-column query, got " +
                                               std::to_string(rel.arity()) + " columns");
    }
    if (rel.size() > 1) {
      throw Error(ErrorCode::InvalidQuery,
                  "scalar assignment query returned " + std::to_string(rel.size()) + " rows");
    }
    return rel.empty() ? Value{} : rel.rows[0][0];
  }

  bool condition(const Expr& e, LogicalTime t) {
    Value v = evaluate_scalar(e, env, db_, t);
    if (v.is_null()) return false;
    if (v.type() != Type::Bool) throw Error(ErrorCode::TypeMismatch, "condition is not boolean");
    return v.as_bool();
  }

  void assign_scalar(const Statement& s, const std::string& name, Value v, LogicalTime t) {
    v = checked_scalar(name, std::move(v));
    env.set_scalar(name, v);
    auto r = record(t, s, StepKind::AssignScalar);
    r.var = name;
    r.scalar = std::move(v);
    finish(r);
  }

  void exec(const Statement& s) {
    try {
      exec_inner(s);
    } catch (Error& e) {
      if (!e.statement_id()) e.set_statement_id(s.id);
      throw;
    }
  }

  void exec_inner(const Statement& s) {
    if (s.is<DeclareScalar>()) {
      const auto& d = s.as<DeclareScalar>();
      if (!d.init) return;  // declared but unbound until first assignment
      LogicalTime t = tick();
      assign_scalar(s, d.name, evaluate_scalar(*d.init, env, db_, t), t);
    } else if (s.is<DeclareTable>()) {
      return;
    } else if (s.is<AssignScalar>()) {
      const auto& a = s.as<AssignScalar>();
      LogicalTime t = tick();
      Value v = std::holds_alternative<Expr>(a.value) ? evaluate_scalar(std::get<Expr>(a.value), env, db_, t)
                                                      : single_cell(std::get<QueryAst>(a.value), t);
      assign_scalar(s, a.name, std::move(v), t);
    } else if (s.is<AssignTable>()) {
      const auto& a = s.as<AssignTable>();
      LogicalTime t = tick();
      Relation rel = evaluate(a.query, env, db_, t);
      auto r = record(t, s, StepKind::AssignTable);
      r.var = a.name;
      r.row_count = rel.size();
      env.set_table(a.name, std::move(rel));
      finish(r);
    } else if (s.is_dml()) {
      if (steps >= cfg_.max_steps) {
        throw Error(ErrorCode::StepLimitExceeded, "step limit of " + std::to_string(cfg_.max_steps) + " reached");
      }
      ++steps;
      std::size_t n = execute_dml(s, env, db_);  // advances the clock itself
      auto r = record(db_.clock(), s, StepKind::Dml);
      r.row_count = n;
      finish(r);
    } else if (s.is<IfStmt>()) {
      const auto& i = s.as<IfStmt>();
      LogicalTime t = tick();
      bool c = condition(i.condition, t);
      auto r = record(t, s, StepKind::Branch);
      r.condition = c;
      finish(r);
      parents_.push_back(t);
      exec_block(c ? i.then_body : i.else_body);
      parents_.pop_back();
    } else if (s.is<WhileStmt>()) {
      const auto& w = s.as<WhileStmt>();
      for (;;) {
        LogicalTime t = tick();
        bool c = condition(w.condition, t);
        auto r = record(t, s, StepKind::LoopIter);
        r.condition = c;
        finish(r);
        if (!c) break;
        parents_.push_back(t);
        exec_block(w.body);
        parents_.pop_back();
      }
    } else if (s.is<TraceRecordStmt>()) {
      if (!cfg_.tracing || !sink_) return;
      if (!last_ || last_->statement != s.as<TraceRecordStmt>().traced) {
        throw Error(ErrorCode::MalformedTrace,
                    "trace record for statement " + std::to_string(s.as<TraceRecordStmt>().traced) +
                        " does not follow its instruction");
      }
      sink_->on_trace_record(*last_, db_);
    }
  }

  Database& db_;
  const ExecutionConfig& cfg_;
  StepSink* sink_;
  std::map<std::string, Type> types_;
  std::vector<LogicalTime> parents_;
  std::optional<StepRecord> last_;
};

}  // namespace

RunResult run(const ProcedureAst& proc, const Environment& args, Database& db, const ExecutionConfig& cfg,
              StepSink* sink) {
  if (cfg.max_steps == 0) throw Error(ErrorCode::InvalidQuery, "max_steps must be positive");
  auto lock = db.acquire_writer();
  Interpreter in(proc, db, cfg, sink);
  in.env = bind_arguments(proc, args);
  RunResult res;
  res.start_clock = db.clock();
  in.exec_block(proc.body);
  res.end_clock = db.clock();
  res.steps = in.steps;
  res.env = std::move(in.env);
  return res;
}

}  // namespace tardisp
