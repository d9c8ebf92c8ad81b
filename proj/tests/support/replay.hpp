#pragma once

// Replay oracle: a sink that copies the whole environment and every user
// table after each step, plus the fixture procedures the replay checks run.

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "paths.hpp"
#include "properties.hpp"
#include "tardisp/fixture.hpp"
#include "tardisp/parser.hpp"
#include "tardisp/tracer.hpp"

namespace tardisp::testing {

struct Snapshot {
  StepRecord rec;
  Environment env;
  std::map<std::string, Relation> tables;
};

class SnapshotOracle : public StepSink {
 public:
  explicit SnapshotOracle(std::vector<std::string> tables) : tables_(std::move(tables)) {}

  void on_step(const StepRecord& rec, const Environment& env, const Database& db) override {
    Snapshot s{rec, env, {}};
    for (const auto& t : tables_) s.tables.emplace(t, db.scan_asof(t, db.clock()));
    snaps.push_back(std::move(s));
  }

  std::vector<Snapshot> snaps;

 private:
  std::vector<std::string> tables_;
};

struct FixtureProc {
  std::string name;
  std::string source;
  Environment args;
};

inline Relation shrink_argument() {
  Relation r;
  r.columns = {{"id", Type::Int, std::nullopt}, {"total", Type::Int, std::nullopt}};
  for (auto [id, total] : std::vector<std::pair<int64_t, int64_t>>{{1, 1000}, {2, 500}, {3, 700}, {4, 300}, {5, 0}}) {
    r.rows.push_back({Value::integer(id), Value::integer(total)});
  }
  return r;
}

// All run against the Table-1 fixture.
inline std::vector<FixtureProc> fixture_procedures() {
  std::vector<FixtureProc> out;
  {
    FixtureProc p{"pay_orders", read_data("fixtures/table1/pay_orders.proc"), {}};
    p.args.set_scalar("project", Value::integer(1));
    out.push_back(std::move(p));
  }
  {
    FixtureProc p{"fill_orders", read_data("fixtures/procs/fill_orders.proc"), {}};
    p.args.set_scalar("n", Value::integer(60));
    out.push_back(std::move(p));
  }
  {
    FixtureProc p{"triage", read_data("fixtures/procs/triage.proc"), {}};
    p.args.set_scalar("threshold", Value::integer(600));
    out.push_back(std::move(p));
  }
  {
    FixtureProc p{"shrink", read_data("fixtures/procs/shrink.proc"), {}};
    p.args.set_table("orders", shrink_argument());
    out.push_back(std::move(p));
  }
  return out;
}

inline const std::vector<std::string>& fixture_tables() {
  static const std::vector<std::string> t = {"Projects", "PurchaseOrders"};
  return t;
}

struct TracedFixture {
  Database db;
  ProcedureAst proc;
  SnapshotOracle oracle{fixture_tables()};
  TracedRun run;
  Trace trace;
  QueryRegistry registry;
};

inline std::unique_ptr<TracedFixture> trace_fixture(const FixtureProc& fp) {
  auto f = std::make_unique<TracedFixture>();
  load_fixture(f->db, data_path("fixtures/table1"));
  f->proc = parse_procedure(fp.source);
  f->run = run_traced(f->proc, fp.source, fp.args, f->db, {}, &f->oracle);
  f->trace = load_trace(f->db, f->run.trace_id);
  f->registry = QueryRegistry::from_procedure(f->proc);
  return f;
}

inline std::string binding_text(const Binding& b) {
  if (std::holds_alternative<Value>(b)) return to_sql_literal(std::get<Value>(b));
  const auto& rel = *std::get<TableBinding>(b);
  return std::to_string(rel.size()) + " rows " + rows_text(rel.rows);
}

// Every step, every variable in scope: reconstruction equals the snapshot.
// Also checks the stored row counts and that the scope matches exactly.
inline PropertyResult check_replay(const TracedFixture& f) {
  PropertyResult res;
  Reconstructor rc(f.trace, f.registry, f.db);
  if (f.oracle.snaps.size() != f.trace.events.size()) {
    res.fail("oracle saw " + std::to_string(f.oracle.snaps.size()) + " steps, trace has " +
             std::to_string(f.trace.events.size()));
    return res;
  }
  for (const auto& snap : f.oracle.snaps) {
    LogicalTime s = snap.rec.step;
    auto scope = rc.in_scope(s);
    std::vector<std::string> expected;
    for (const auto& [name, _] : snap.env.bindings()) expected.push_back(name);
    if (scope != expected) {
      ++res.cases;
      res.fail("scope differs at step " + std::to_string(s));
    }
    for (const auto& [name, want] : snap.env.bindings()) {
      ++res.cases;
      try {
        Binding got = rc.value(name, s);
        if (!binding_equal(got, want)) {
          res.fail(name + " at step " + std::to_string(s) + ": got " + binding_text(got) + ", want " +
                   binding_text(want));
        }
      } catch (const Error& e) {
        res.fail(name + " at step " + std::to_string(s) + ": " + e.what());
      }
    }
    const TraceEvent* ev = f.trace.event_at(s);
    if (!ev || ev->kind != snap.rec.kind || ev->statement_id != snap.rec.statement || ev->parent_step != snap.rec.parent) {
      res.fail("event mismatch at step " + std::to_string(s));
    } else if (ev->kind == StepKind::AssignTable && *ev->row_count != rc.table(*ev->var, s)->size()) {
      res.fail("row_count mismatch at step " + std::to_string(s));
    }
  }
  return res;
}

// Random INSERT/UPDATE/DELETE against the fixture tables, each at a fresh
// time. Statements that violate a key are skipped (the clock still moves).
inline std::size_t apply_random_dml(Database& db, uint64_t seed, std::size_t count) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const char* statuses[] = {"'open'", "'paid'", "'held'"};
  std::size_t applied = 0;
  Environment env;
  auto lock = db.acquire_writer();
  for (std::size_t i = 0; i < count; ++i) {
    std::string sql;
    switch (pick(0, 5)) {
      case 0:
        sql = "INSERT INTO PurchaseOrders VALUES (" + std::to_string(pick(1, 300)) + ", " + std::to_string(pick(1, 3)) +
              ", " + statuses[pick(0, 2)] + ", " + std::to_string(pick(0, 2000)) + ")";
        break;
      case 1:
        sql = "INSERT INTO Projects VALUES (" + std::to_string(pick(1, 20)) + ", 'P', " + std::to_string(pick(-500, 5000)) + ")";
        break;
      case 2:
        sql = "UPDATE PurchaseOrders SET status = " + std::string(statuses[pick(0, 2)]) + ", total = total + " +
              std::to_string(pick(-50, 50)) + " WHERE id = " + std::to_string(pick(1, 300));
        break;
      case 3:
        sql = "UPDATE Projects SET budget = budget - " + std::to_string(pick(0, 400)) + " WHERE id <= " +
              std::to_string(pick(1, 3));
        break;
      case 4:
        sql = "DELETE FROM PurchaseOrders WHERE id = " + std::to_string(pick(1, 300));
        break;
      default:
        sql = "DELETE FROM Projects WHERE budget < " + std::to_string(pick(-200, 100));
        break;
    }
    auto proc = parse_procedure("PROCEDURE dml() BEGIN " + sql + "; END");
    try {
      execute_dml(proc.body.at(0), env, db);
      ++applied;
    } catch (const Error&) {
    }
  }
  return applied;
}

}  // namespace tardisp::testing
