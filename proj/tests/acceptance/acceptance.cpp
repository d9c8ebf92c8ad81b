// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Reuses the oracles of the unit tests.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ast_gen.hpp"
#include "paths.hpp"
#include "properties.hpp"
#include "replay.hpp"
#include "tardisp/ast_json.hpp"
#include "tardisp/debug_service.hpp"
#include "tardisp/render.hpp"

using namespace tardisp;
using namespace tardisp::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects the first few reasons a criterion failed.
struct Checker {
  std::vector<std::string> problems;
  std::size_t checks = 0;
  void expect(bool ok, const std::string& why) {
    ++checks;
    if (!ok && problems.size() < 5) problems.push_back(why);
    if (!ok && problems.size() == 5) problems.push_back("...");
  }
  Outcome done(std::string summary) const {
    if (problems.empty()) return {true, summary};
    std::string all;
    for (const auto& p : problems) all += (all.empty() ? "" : "; ") + p;
    return {false, all};
  }
};

const FixtureProc& fixture(const std::string& name) {
  static const auto all = fixture_procedures();
  for (const auto& f : all) {
    if (f.name == name) return f;
  }
  throw std::runtime_error("no fixture " + name);
}

std::string opt_text(const std::optional<Value>& v) { return v ? to_sql_literal(*v) : "-"; }

Outcome replay_equivalence() {
  Checker c;
  std::size_t cases = 0;
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& fp : fixture_procedures()) {
    auto f = trace_fixture(fp);
    auto r = check_replay(*f);
    cases += r.cases;
    c.expect(r.ok(), fp.name + ": " + r.first_failure);
  }
  // the fixture set must cover a long loop with DML, branches and a self-referencing assignment
  auto fill = trace_fixture(fixture("fill_orders"));
  std::size_t iters = 0, dml = 0;
  for (const auto& e : fill->trace.events) {
    iters += e.kind == StepKind::LoopIter;
    dml += e.kind == StepKind::Dml;
  }
  c.expect(iters >= 51 && dml >= 50, "fill_orders loop too short");
  auto triage = trace_fixture(fixture("triage"));
  bool branches = std::any_of(triage->trace.events.begin(), triage->trace.events.end(),
                              [](const TraceEvent& e) { return e.kind == StepKind::Branch; });
  c.expect(branches, "triage has no branch steps");
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(secs < 60, "took " + std::to_string(secs) + " s");
  std::ostringstream s;
  s << cases << " variable/step comparisons over " << fixture_procedures().size() << " procedures in " << secs << " s";
  return c.done(s.str());
}

Outcome table_one() {
  Checker c;
  auto f = trace_fixture(fixture("pay_orders"));
  Reconstructor rc(f->trace, f->registry, f->db);
  auto d = execute_time_diff(parse_query(read_data("fixtures/queries/listing2_table1.sql")), rc);
  using V = std::vector<std::optional<Value>>;
  using F = std::vector<bool>;
  auto I = [](int64_t v) { return std::optional<Value>(Value::integer(v)); };
  auto T = [](const char* v) { return std::optional<Value>(Value::text(v)); };
  c.expect(d.rows.size() == 2, "expected 2 rows, got " + std::to_string(d.rows.size()));
  c.expect(d.value_columns == std::vector<std::string>{"pr.name", "pr.budget", "open_total", "po2.status", "po2.total"},
           "unexpected value columns");
  if (d.rows.size() == 2 && d.value_columns.size() == 5) {
    for (std::size_t r = 0; r < 2; ++r) {
      const auto& row = d.rows[r];
      std::string tag = "order " + std::to_string(r + 1) + " ";
      c.expect(row.key == Row{Value::integer(1), Value::integer(static_cast<int64_t>(r + 1))}, tag + "key");
      const auto& budget = row.cells[1];
      c.expect(budget.values == V{I(1200), I(200), I(-300)}, tag + "budget values");
      c.expect(budget.changed_from_prev == F{true, true}, tag + "budget flags");
      const auto& sum = row.cells[2];
      c.expect(sum.values == V{I(1500), I(500), I(0)}, tag + "sum values " + opt_text(sum.values[0]) + "," +
                                                           opt_text(sum.values[1]) + "," + opt_text(sum.values[2]));
      c.expect(sum.changed_from_prev == F{true, true}, tag + "sum flags");
      c.expect(row.cells[0].changed_from_prev == F{false, false}, tag + "name flags");
      c.expect(row.cells[4].changed_from_prev == F{false, false}, tag + "total flags");
      const auto& status = row.cells[3];
      if (r == 0) {
        c.expect(status.values == V{T("open"), T("paid"), T("paid")}, tag + "status values");
        c.expect(status.changed_from_prev == F{true, false}, tag + "status flags (red only)");
      } else {
        c.expect(status.values == V{T("open"), T("open"), T("paid")}, tag + "status values");
        c.expect(status.changed_from_prev == F{false, true}, tag + "status flags (green only)");
      }
      // every jump lies in its pair's window and re-querying around it shows the change
      for (std::size_t ci : {std::size_t{1}, std::size_t{3}}) {
        const auto& cell = row.cells[ci];
        c.expect(cell.jump_step.has_value(), tag + d.value_columns[ci] + " has no jump_step");
        for (std::size_t p = 0; p < 2; ++p) {
          auto j = cell.pair_jump_steps[p];
          c.expect(j.has_value() == cell.changed_from_prev[p], tag + "pair jump presence");
          if (!j) continue;
          c.expect(*j > d.steps[p] && *j <= d.steps[p + 1], tag + "jump outside window");
          std::string q = ci == 1 ? "SELECT budget FROM Projects WHERE id = 1"
                                  : "SELECT status FROM PurchaseOrders WHERE id = " + std::to_string(r + 1);
          auto before = execute_at_step(parse_query(q + " AT STEP " + std::to_string(*j - 1)), rc);
          auto at = execute_at_step(parse_query(q + " AT STEP " + std::to_string(*j)), rc);
          c.expect(!(before == at), tag + "no change at jump " + std::to_string(*j));
          c.expect(f->trace.event_at(*j) && f->trace.event_at(*j)->kind == StepKind::Dml, tag + "jump is not a DML step");
        }
      }
    }
  }
  return c.done("budget (1200, 200, -300), sum (1500, 500, 0), statuses open->paid at jumps 7 and 13");
}

Outcome at_step_identity() {
  Checker c;
  const std::vector<std::string> queries = {
      "SELECT * FROM PurchaseOrders",
      "SELECT * FROM Projects",
      "SELECT p.name, SUM(o.total), COUNT(*) FROM Projects p JOIN PurchaseOrders o ON o.project_id = p.id GROUP BY p.name",
      "SELECT status, MAX(total) FROM PurchaseOrders WHERE total > 100 GROUP BY status ORDER BY status",
      "SELECT p.id FROM Projects p LEFT JOIN PurchaseOrders o ON o.project_id = p.id WHERE o.id IS NULL",
  };
  std::size_t n = 0;
  for (const auto& fp : fixture_procedures()) {
    auto f = trace_fixture(fp);
    Reconstructor rc(f->trace, f->registry, f->db);
    for (const auto& q : queries) {
      auto plain = evaluate(parse_query(q), {}, f->db, f->db.clock());
      auto at = execute_at_step(parse_query(q + " AT STEP " + std::to_string(f->trace.last_step())), rc);
      c.expect(plain == at, fp.name + ": " + q);
      ++n;
    }
  }
  return c.done(std::to_string(n) + " query/fixture pairs identical at the final step");
}

Outcome post_trace_immunity() {
  Checker c;
  const std::vector<std::string> queries = {
      "SELECT * FROM PurchaseOrders",
      "SELECT p.id, p.budget, COUNT(*) FROM Projects p JOIN PurchaseOrders o ON o.project_id = p.id GROUP BY p.id, p.budget",
  };
  std::size_t applied_total = 0, compared = 0;
  uint64_t seed = 1;
  for (const auto& fp : fixture_procedures()) {
    auto f = trace_fixture(fp);
    std::vector<Relation> before;
    {
      Reconstructor rc(f->trace, f->registry, f->db);
      for (const auto& e : f->trace.events) {
        for (const auto& q : queries) before.push_back(execute_at_step(parse_query(q + " AT STEP " + std::to_string(e.step)), rc));
      }
    }
    applied_total += apply_random_dml(f->db, seed++, 1000);
    auto r = check_replay(*f);  // fresh reconstructor, no memo
    c.expect(r.ok(), fp.name + " replay after DML: " + r.first_failure);
    Reconstructor rc(f->trace, f->registry, f->db);
    std::size_t i = 0;
    for (const auto& e : f->trace.events) {
      for (const auto& q : queries) {
        auto now = execute_at_step(parse_query(q + " AT STEP " + std::to_string(e.step)), rc);
        c.expect(now == before[i++], fp.name + " step " + std::to_string(e.step) + ": " + q);
        ++compared;
      }
    }
  }
  return c.done("1000 random DML per fixture (" + std::to_string(applied_total) + " applied); " +
                std::to_string(compared) + " AT STEP results and all replays unchanged");
}

Outcome oracle_equivalence() {
  Checker c;
  auto t0 = std::chrono::steady_clock::now();
  auto storage = check_storage_sequences(0xacce55, 1000);
  auto engine = check_engine_queries(0xacce55, 1000);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.expect(storage.ok() && storage.cases >= 1000, "storage: " + storage.first_failure);
  c.expect(engine.ok() && engine.cases >= 1000, "engine: " + engine.first_failure);
  c.expect(secs < 120, "took " + std::to_string(secs) + " s");
  std::ostringstream s;
  s << storage.cases << " storage sequences vs snapshot store, " << engine.cases
    << " queries vs brute-force evaluator in " << secs << " s";
  return c.done(s.str());
}

Outcome overhead(std::size_t orders, std::size_t reps, const std::string& out) {
  Checker c;
  Database base;
  const std::size_t projects = 1000;
  generate_bench_data(base, projects, orders, 42);
  auto report = run_bench(base, {default_bench_case(projects)}, reps);
  if (!out.empty()) std::ofstream(out) << report.to_json().dump(2) << "\n";
  c.expect(report.entries.size() == 3, "expected 3 scales");
  c.expect(report.all_reproduced(), "reproduced final state differs from the run's environment");
  c.expect(report.max_traced_over_plain() <= 1.5, "traced/plain " + std::to_string(report.max_traced_over_plain()));
  c.expect(report.max_diff_over_single() <= 3.5, "time-diff/single " + std::to_string(report.max_diff_over_single()));
  std::ostringstream s;
  s << report.base_rows << " rows, " << reps << " reps, 3 scales: traced/plain max " << report.max_traced_over_plain()
    << ", time-diff(k=3)/single max " << report.max_diff_over_single() << ", reproduce/plain";
  for (const auto& e : report.entries) s << " " << e.reproduce_over_plain();
  if (!out.empty()) s << "; report " << out;
  return c.done(s.str());
}

Outcome parser_goldens() {
  Checker c;
  c.expect(query_to_json(parse_query(read_data("fixtures/queries/listing1.sql"))).dump(2) + "\n" ==
               read_data("golden/listing1.ast.json"),
           "listing 1 differs from its golden AST");
  c.expect(query_to_json(parse_query(read_data("fixtures/queries/listing2.sql"))).dump(2) + "\n" ==
               read_data("golden/listing2.ast.json"),
           "listing 2 differs from its golden AST");
  AstGenerator gen(20261016);
  std::size_t ok = 0;
  for (int i = 0; i < 500; ++i) {
    QueryAst q = gen.query();
    std::string text = render_query(q);
    try {
      bool same = parse_query(text) == q;
      c.expect(same, "round trip changed: " + text);
      ok += same;
    } catch (const Error& e) {
      c.expect(false, "round trip failed to parse: " + text + " (" + e.what() + ")");
    }
  }
  return c.done("both listings match their goldens; " + std::to_string(ok) + "/500 generated ASTs round-trip");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string bench_out;
  std::size_t reps = 7, orders = 100000;
  app.add_option("--bench-out", bench_out, "Where to write the bench report");
  app.add_option("--reps", reps, "Bench repetitions (at least 5)")->check(CLI::Range(5, 1000));
  app.add_option("--orders", orders, "Order rows in the bench data");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"replay-equivalence", replay_equivalence},
      {"table1-reproduction", table_one},
      {"at-step-identity", at_step_identity},
      {"post-trace-immunity", post_trace_immunity},
      {"storage-engine-oracles", oracle_equivalence},
      {"overhead-ratios", [&] { return overhead(orders, reps, bench_out); }},
      {"parser-goldens", parser_goldens},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
