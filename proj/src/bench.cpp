#include <algorithm>
#include <chrono>
#include <random>

#include "tardisp/debug_service.hpp"
#include "tardisp/parser.hpp"

namespace tardisp {

namespace {

constexpr const char* kBenchSchema =
    "CREATE TABLE Projects (id INT, name VARCHAR(100), budget INT, PRIMARY KEY (id));\n"
    "CREATE TABLE PurchaseOrders (id INT, project_id INT, status VARCHAR(20), total INT, PRIMARY KEY (id));\n";

// Shrinks the open orders of the selected projects one by one; the size of
// every table assignment scales with max_project.
constexpr const char* kBenchProcedure = R"(CREATE PROCEDURE review(IN max_project INT, IN rounds INT)
AS
BEGIN
  DECLARE selected TABLE;
  DECLARE open_orders TABLE;
  DECLARE open_sum INT;
  DECLARE biggest INT;
  DECLARE i INT = 0;

  selected = SELECT id, name, budget FROM Projects WHERE id <= :max_project;
  open_orders = SELECT po.id, po.project_id, po.total
                FROM :selected pr
                JOIN PurchaseOrders po ON po.project_id = pr.id
                WHERE po.status = 'open';
  WHILE i < :rounds DO
    open_sum = SELECT SUM(total) FROM :open_orders;
    biggest = SELECT MAX(id) FROM :open_orders;
    UPDATE PurchaseOrders SET status = 'paid' WHERE id = :biggest;
    UPDATE Projects SET budget = budget - 1 WHERE id <= :max_project;
    open_orders = SELECT o.id, o.project_id, o.total FROM :open_orders o WHERE o.id <> :biggest;
    i = i + 1;
  END WHILE;
END;
)";

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Json times_json(const std::vector<double>& xs) {
  Json j = Json::array();
  for (double x : xs) j.push_back(x);
  return j;
}

}  // namespace

double median(std::vector<double> xs) {
  if (xs.empty()) return 0;
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2;
}

void generate_bench_data(Database& db, std::size_t projects, std::size_t orders, uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto lock = db.acquire_writer();
  for (auto& def : parse_ddl(kBenchSchema)) db.create_table(std::move(def));
  LogicalTime t = db.advance_clock();
  std::vector<Row> rows;
  for (std::size_t i = 1; i <= projects; ++i) {
    rows.push_back({Value::integer(static_cast<int64_t>(i)), Value::text("Project " + std::to_string(i)),
                    Value::integer(std::uniform_int_distribution<int64_t>(1000, 100000)(rng))});
  }
  db.apply_insert("Projects", rows, t);
  rows.clear();
  const char* statuses[] = {"open", "open", "open", "paid", "held"};
  for (std::size_t i = 1; i <= orders; ++i) {
    rows.push_back({Value::integer(static_cast<int64_t>(i)),
                    Value::integer(std::uniform_int_distribution<int64_t>(1, static_cast<int64_t>(projects))(rng)),
                    Value::text(statuses[std::uniform_int_distribution<int>(0, 4)(rng)]),
                    Value::integer(std::uniform_int_distribution<int64_t>(1, 2000)(rng))});
  }
  db.apply_insert("PurchaseOrders", rows, t);
}

BenchCase default_bench_case(std::size_t projects) {
  BenchCase c;
  c.name = "review";
  c.procedure = kBenchProcedure;
  // small / medium / large intermediate results
  for (std::size_t share : {100, 10, 1}) {
    Environment args;
    args.set_scalar("max_project", Value::integer(static_cast<int64_t>(std::max<std::size_t>(1, projects / share))));
    args.set_scalar("rounds", Value::integer(5));
    c.argument_sets.push_back(std::move(args));
  }
  c.diff_queries = {
      "SELECT pr.id, pr.budget, SUM(CASE WHEN po.status = 'open' THEN po.total ELSE 0 END) AS open_total "
      "FROM Projects pr JOIN PurchaseOrders po ON po.project_id = pr.id "
      "WHERE before!pr.budget <> after!pr.budget GROUP BY pr.id, pr.budget",
      "SELECT po.id, po.status, po.total FROM PurchaseOrders po "
      "WHERE po.project_id <= 20 AND before!po.status <> after!po.status",
  };
  return c;
}

BenchReport run_bench(const Database& base, const std::vector<BenchCase>& cases, std::size_t repetitions) {
  BenchReport report;
  report.repetitions = repetitions;
  for (const auto& t : base.table_names()) report.base_rows += base.scan_asof(t, base.clock()).size();
  using clock = std::chrono::steady_clock;

  for (const auto& bc : cases) {
    const ProcedureAst proc = parse_procedure(bc.procedure);
    for (const auto& args : bc.argument_sets) {
      BenchEntry e;
      e.procedure = bc.name;
      e.arguments = environment_to_json(args).dump();
      e.reproduce_matches = true;
      std::unique_ptr<Database> traced_db;
      for (std::size_t rep = 0; rep < repetitions; ++rep) {
        {
          auto db = base.clone();
          auto t0 = clock::now();
          auto r = run(proc, args, *db);
          e.plain_ms.push_back(ms_since(t0));
          e.steps = r.steps;
        }
        traced_db = base.clone();
        auto t0 = clock::now();
        auto tr = run_traced(proc, bc.procedure, args, *traced_db);
        e.traced_ms.push_back(ms_since(t0));
        if (!tr.result) throw *tr.error;

        t0 = clock::now();
        Trace trace = load_trace(*traced_db, tr.trace_id);
        auto registry = QueryRegistry::from_procedure(*trace.procedure);
        Reconstructor rc(trace, registry, *traced_db);
        Environment env = rc.environment_at(trace.last_step());
        e.reproduce_ms.push_back(ms_since(t0));
        e.reproduce_matches = e.reproduce_matches && env == tr.result->env;
      }
      e.plain = median(e.plain_ms);
      e.traced = median(e.traced_ms);
      e.reproduce = median(e.reproduce_ms);

      // queries against the last traced copy
      Trace trace = load_trace(*traced_db, list_traces(*traced_db).back());
      auto registry = QueryRegistry::from_procedure(*trace.procedure);
      Reconstructor rc(trace, registry, *traced_db);
      const LogicalTime first = trace.first_step(), last = trace.last_step(), mid = first + (last - first) / 2;
      for (const auto& text : bc.diff_queries) {
        QueryTiming qt;
        qt.sql = text + " AT STEP before=" + std::to_string(first) + ", now=" + std::to_string(mid) +
                 ", after=" + std::to_string(last);
        QueryAst diff_q = parse_query(qt.sql);
        QueryAst single_q = partial_query(diff_q, mid);
        execute_at_step(single_q, rc);  // warm the variable memo for both
        execute_time_diff(diff_q, rc);
        for (std::size_t rep = 0; rep < repetitions; ++rep) {
          auto t0 = clock::now();
          execute_at_step(single_q, rc);
          qt.single_ms.push_back(ms_since(t0));
          t0 = clock::now();
          execute_time_diff(diff_q, rc);
          qt.diff_ms.push_back(ms_since(t0));
        }
        qt.single = median(qt.single_ms);
        qt.diff = median(qt.diff_ms);
        e.queries.push_back(std::move(qt));
      }
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

double BenchReport::max_traced_over_plain() const {
  double m = 0;
  for (const auto& e : entries) m = std::max(m, e.traced_over_plain());
  return m;
}

double BenchReport::max_diff_over_single() const {
  double m = 0;
  for (const auto& e : entries) {
    for (const auto& q : e.queries) m = std::max(m, q.diff_over_single());
  }
  return m;
}

bool BenchReport::all_reproduced() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const BenchEntry& e) { return e.reproduce_matches; });
}

Json BenchReport::to_json() const {
  Json list = Json::array();
  for (const auto& e : entries) {
    Json queries = Json::array();
    for (const auto& q : e.queries) {
      queries.push_back({{"sql", q.sql},
                         {"single_ms", times_json(q.single_ms)},
                         {"diff_ms", times_json(q.diff_ms)},
                         {"single_median_ms", q.single},
                         {"diff_median_ms", q.diff},
                         {"diff_over_single", q.diff_over_single()}});
    }
    list.push_back({{"procedure", e.procedure},
                    {"arguments", Json::parse(e.arguments)},
                    {"steps", e.steps},
                    {"plain_ms", times_json(e.plain_ms)},
                    {"traced_ms", times_json(e.traced_ms)},
                    {"reproduce_ms", times_json(e.reproduce_ms)},
                    {"plain_median_ms", e.plain},
                    {"traced_median_ms", e.traced},
                    {"reproduce_median_ms", e.reproduce},
                    {"traced_over_plain", e.traced_over_plain()},
                    {"reproduce_over_plain", e.reproduce_over_plain()},
                    {"reproduce_matches", e.reproduce_matches},
                    {"queries", std::move(queries)}});
  }
  return {{"repetitions", repetitions},
          {"base_rows", base_rows},
          {"entries", std::move(list)},
          {"max_traced_over_plain", max_traced_over_plain()},
          {"max_diff_over_single", max_diff_over_single()},
          {"all_reproduced", all_reproduced()}};
}

}  // namespace tardisp
