#include "tardisp/debug_service.hpp"

#include <algorithm>

#include "tardisp/fixture.hpp"
#include "tardisp/parser.hpp"

namespace tardisp {

std::optional<NavOp> parse_nav_op(std::string_view name) {
  if (name == "forward") return NavOp::Forward;
  if (name == "back") return NavOp::Back;
  if (name == "to") return NavOp::To;
  if (name == "into") return NavOp::Into;
  if (name == "over") return NavOp::Over;
  if (name == "out") return NavOp::Out;
  return std::nullopt;
}

NavResult navigate_tree(const Trace& trace, const ExecutionTree& tree, LogicalTime cursor, NavOp op,
                        std::optional<LogicalTime> to) {
  if (trace.empty()) return {cursor, true};
  const LogicalTime first = trace.first_step(), last = trace.last_step();
  auto forward = [&]() -> NavResult { return cursor < last ? NavResult{cursor + 1, false} : NavResult{last, true}; };
  switch (op) {
    case NavOp::Forward:
      return forward();
    case NavOp::Back:
      return cursor > first ? NavResult{cursor - 1, false} : NavResult{first, true};
    case NavOp::To: {
      if (!to) throw Error(ErrorCode::BadRequest, "navigate to needs a step");
      if (*to < first) return {first, true};
      if (*to > last) return {last, true};
      return {*to, false};
    }
    case NavOp::Into: {
      const auto& kids = tree.children(cursor);
      if (!kids.empty()) return {kids.front(), false};
      return forward();
    }
    case NavOp::Over: {
      for (std::optional<LogicalTime> at = cursor; at; at = tree.parent(*at)) {
        if (auto next = tree.next_sibling(*at)) return {*next, false};
      }
      return {last, true};
    }
    case NavOp::Out: {
      if (auto p = tree.parent(cursor)) return {*p, false};
      return {cursor, true};
    }
  }
  return {cursor, true};
}

Session::Session(std::string id, std::shared_ptr<Database> db, Trace trace)
    : id_(std::move(id)), db_(std::move(db)), trace_(std::move(trace)) {
  registry_ = QueryRegistry::from_procedure(*trace_.procedure);
  tree_ = ExecutionTree::build(trace_.events);
  rc_ = std::make_unique<Reconstructor>(trace_, registry_, *db_);
  cursor_ = trace_.first_step();
}

std::shared_ptr<Session> Session::create(std::string id, std::shared_ptr<Database> db,
                                         const std::string& procedure_text, const Environment& args) {
  auto proc = parse_procedure(procedure_text);
  bind_arguments(proc, args);  // bad arguments are a request error, not a failed run
  auto run = run_traced(proc, procedure_text, args, *db);
  return std::shared_ptr<Session>(new Session(std::move(id), db, load_trace(*db, run.trace_id)));
}

std::shared_ptr<Session> Session::open(std::string id, std::shared_ptr<Database> db, TraceId trace_id) {
  auto trace = load_trace(*db, trace_id);
  return std::shared_ptr<Session>(new Session(std::move(id), std::move(db), std::move(trace)));
}

LogicalTime Session::cursor() const {
  std::lock_guard lock(mu_);
  return cursor_;
}

NavResult Session::navigate(NavOp op, std::optional<LogicalTime> to) {
  std::lock_guard lock(mu_);
  auto r = navigate_tree(trace_, tree_, cursor_, op, to);
  cursor_ = r.cursor;
  return r;
}

LogicalTime Session::resolve_step(std::optional<LogicalTime> step) const {
  if (!step) return cursor();
  return check_step(trace_, *step);
}

std::vector<VariableView> Session::variables(std::optional<LogicalTime> step) const {
  const LogicalTime s = resolve_step(step);
  std::vector<VariableView> out;
  for (const auto& [name, is_table] : trace_.variables()) {
    VariableView v;
    v.name = name;
    v.is_table = is_table;
    v.assigned_at = rc_->governing_step(name, s);
    v.bound = v.assigned_at.has_value();
    if (v.bound) {
      if (!is_table) {
        v.value = rc_->scalar(name, s);
      } else if (const TraceEvent* e = trace_.event_at(*v.assigned_at); e && e->row_count) {
        v.row_count = *e->row_count;
      } else {
        v.row_count = rc_->table(name, s)->size();  // untouched table parameter
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

Binding Session::variable(const std::string& name, std::optional<LogicalTime> step) const {
  return rc_->value(name, resolve_step(step));
}

std::optional<LogicalTime> Session::assignment(const std::string& name, std::optional<LogicalTime> step,
                                               NavDirection dir) const {
  if (!trace_.variables().count(name)) throw Error(ErrorCode::UnknownVariable, "no variable " + name);
  return assignment_nav(trace_, name, resolve_step(step), dir);
}

ConsoleResult Session::query(std::string_view text) const { return console_query(text, *rc_, cursor()); }

void Session::set_bookmark(const std::string& name, std::optional<LogicalTime> step) {
  if (name.empty()) throw Error(ErrorCode::BadRequest, "bookmark needs a name");
  LogicalTime s = resolve_step(step);
  if (!trace_.event_at(s)) throw Error(ErrorCode::UnknownStep, "no step " + std::to_string(s) + " in the trace");
  std::lock_guard lock(mu_);
  bookmarks_[name] = s;
}

std::map<std::string, LogicalTime> Session::bookmarks() const {
  std::lock_guard lock(mu_);
  return bookmarks_;
}

std::string SessionManager::next_id() {
  std::lock_guard lock(mu_);
  return "s" + std::to_string(++counter_);
}

std::shared_ptr<Session> SessionManager::create(const std::string& procedure_text, const Environment& args,
                                                const std::optional<std::filesystem::path>& fixture_dir) {
  std::shared_ptr<Database> db = db_;
  if (fixture_dir) {
    db = std::make_shared<Database>();
    load_fixture(*db, *fixture_dir);
  }
  auto s = Session::create(next_id(), db, procedure_text, args);
  std::lock_guard lock(mu_);
  sessions_[s->id()] = s;
  return s;
}

std::shared_ptr<Session> SessionManager::open(TraceId trace_id) {
  auto s = Session::open(next_id(), db_, trace_id);
  std::lock_guard lock(mu_);
  sessions_[s->id()] = s;
  return s;
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no session " + id);
  return it->second;
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

// --- JSON -----------------------------------------------------------------

namespace {

Json opt_json(const std::optional<LogicalTime>& t) { return t ? Json(*t) : Json(nullptr); }

Json pos_json(const SourcePos& p) { return {{"line", p.line}, {"col", p.col}, {"offset", p.offset}}; }

}  // namespace

Environment arguments_from_json(const Json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw Error(ErrorCode::BadRequest, "args must be an object");
  Environment env;
  for (const auto& [name, v] : j.items()) {
    if (!v.is_object()) {
      env.set_scalar(name, value_from_json(v));
    } else if (v.contains("kind")) {
      auto kind = v.at("kind").get<std::string>();
      if (kind == "scalar") {
        env.set_scalar(name, value_from_json(v.at("value")));
      } else if (kind == "table") {
        env.set_table(name, relation_from_json(v.contains("relation") ? v.at("relation") : v));
      } else {
        throw Error(ErrorCode::BadRequest, "unknown argument kind " + kind);
      }
    } else {
      env.set_table(name, relation_from_json(v));
    }
  }
  return env;
}

Json error_to_json(const Error& e) {
  Json j = {{"error", error_code_name(e.code())}, {"message", e.what()}};
  if (e.pos()) {
    j["line"] = e.pos()->line;
    j["col"] = e.pos()->col;
  }
  if (e.statement_id()) j["statement_id"] = *e.statement_id();
  return j;
}

Json relation_page_json(const Relation& rel, std::size_t offset, std::size_t limit) {
  limit = std::min(limit, kPageSize);
  Json j = relation_to_json(rel, offset, limit);
  Json out = {{"kind", "relation"}};
  out["columns"] = std::move(j["columns"]);
  out["rows"] = std::move(j["rows"]);
  out["total_rows"] = rel.size();
  out["offset"] = offset;
  out["limit"] = limit;
  return out;
}

Json diff_to_json(const DiffTable& d) {
  Json rows = Json::array();
  for (const auto& r : d.rows) {
    Json key = Json::array();
    for (const auto& v : r.key) key.push_back(value_to_json(v));
    Json cells = Json::array();
    for (const auto& c : r.cells) {
      Json values = Json::array(), present = Json::array(), jumps = Json::array();
      for (const auto& v : c.values) {
        values.push_back(v ? value_to_json(*v) : Json(nullptr));
        present.push_back(v.has_value());
      }
      for (const auto& j : c.pair_jump_steps) jumps.push_back(opt_json(j));
      cells.push_back({{"values", std::move(values)},
                       {"present", std::move(present)},
                       {"changed", c.changed_from_prev},
                       {"jump_step", opt_json(c.jump_step)},
                       {"pair_jump_steps", std::move(jumps)}});
    }
    rows.push_back({{"key", std::move(key)}, {"cells", std::move(cells)}});
  }
  Json columns = Json::array();
  for (const auto& c : d.key_columns) columns.push_back(c);
  for (const auto& c : d.value_columns) columns.push_back(c);
  return {{"kind", "diff"},          {"columns", std::move(columns)}, {"key_columns", d.key_columns},
          {"value_columns", d.value_columns}, {"step_names", d.step_names}, {"steps", d.steps},
          {"rows", std::move(rows)}};
}

Json console_result_json(const ConsoleResult& r, std::size_t offset, std::size_t limit) {
  if (const auto* rel = std::get_if<Relation>(&r)) return relation_page_json(*rel, offset, limit);
  return diff_to_json(std::get<DiffTable>(r));
}

Json variable_view_json(const VariableView& v) {
  Json j = {{"name", v.name}, {"kind", v.is_table ? "table" : "scalar"}, {"bound", v.bound}};
  if (v.value) j["value"] = value_to_json(*v.value);
  if (v.row_count) j["row_count"] = *v.row_count;
  j["assigned_at"] = opt_json(v.assigned_at);
  return j;
}

Json tree_json(const ExecutionTree& tree) {
  Json nodes = Json::array();
  for (const auto& e : tree.nodes()) {
    nodes.push_back({{"step", e.step},
                     {"parent", opt_json(e.parent_step)},
                     {"kind", step_kind_name(e.kind)},
                     {"statement_id", e.statement_id},
                     {"var", e.var ? Json(*e.var) : Json(nullptr)},
                     {"row_count", e.row_count ? Json(*e.row_count) : Json(nullptr)},
                     {"condition", e.condition ? Json(*e.condition) : Json(nullptr)},
                     {"children", tree.children(e.step)}});
  }
  return {{"roots", tree.roots()}, {"nodes", std::move(nodes)}};
}

Json source_json(const Trace& trace) {
  Json spans = Json::array();
  for_each_statement(trace.procedure->body, [&](const Statement& s) {
    if (s.is<TraceRecordStmt>()) return;
    spans.push_back({{"statement_id", s.id}, {"begin", pos_json(s.span.begin)}, {"end", pos_json(s.span.end)}});
  });
  return {{"text", trace.source}, {"statement_spans", std::move(spans)}};
}

Json session_summary_json(const Session& s) {
  const Trace& t = s.trace();
  std::string state = t.error ? "failed" : (t.empty() ? "empty" : "ok");
  Json j = {{"session_id", s.id()},
            {"trace_id", t.trace_id},
            {"procedure", t.procedure_name},
            {"state", state},
            {"steps", t.events.size()},
            {"first_step", t.first_step()},
            {"last_step", t.last_step()},
            {"cursor", s.cursor()},
            {"roots", s.tree().roots()}};
  if (t.error) {
    j["run_error"] = {{"error", t.error_code ? *t.error_code : ""},
                      {"message", *t.error},
                      {"statement_id", t.error_statement ? Json(*t.error_statement) : Json(nullptr)}};
  }
  Json marks = Json::object();
  for (const auto& [name, step] : s.bookmarks()) marks[name] = step;
  j["bookmarks"] = std::move(marks);
  return j;
}

}  // namespace tardisp
