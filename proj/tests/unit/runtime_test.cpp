#include <gtest/gtest.h>

#include "paths.hpp"
#include "replay.hpp"
#include "tardisp/fixture.hpp"
#include "tardisp/parser.hpp"
#include "tardisp/runtime.hpp"

using namespace tardisp;
using namespace tardisp::testing;

namespace {

struct Recorder : StepSink {
  void on_step(const StepRecord& rec, const Environment&, const Database&) override { steps.push_back(rec); }
  std::vector<StepRecord> steps;
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::BadRequest;
}

// Instruction count of a straight-line body, counted off the AST.
uint64_t count_straight(const std::vector<Statement>& body) {
  uint64_t n = 0;
  for (const auto& s : body) {
    if (s.is<DeclareTable>()) continue;
    if (s.is<DeclareScalar>() && !s.as<DeclareScalar>().init) continue;
    ++n;
  }
  return n;
}

}  // namespace

TEST(Runtime, IncrementAdvancesClockTwice) {
  Database db;
  auto proc = parse_procedure("PROCEDURE p() BEGIN DECLARE x INT; x = 1; x = x + 1; END");
  auto before = db.clock();
  auto res = run(proc, {}, db);
  EXPECT_EQ(res.env.scalar("x"), Value::integer(2));
  EXPECT_EQ(db.clock() - before, 2u);
  EXPECT_EQ(res.steps, 2u);
}

TEST(Runtime, StraightLineStepCount) {
  Database db;
  load_fixture(db, data_path("fixtures/table1"));
  auto proc = parse_procedure(
      "PROCEDURE p() BEGIN DECLARE a INT = 3; DECLARE b INT; DECLARE t TABLE; t = SELECT id FROM Projects; "
      "b = SELECT COUNT(*) FROM :t; UPDATE Projects SET budget = budget + :a; "
      "DELETE FROM PurchaseOrders WHERE id = 4; END");
  auto start = db.clock();
  auto res = run(proc, {}, db);
  EXPECT_EQ(res.steps, count_straight(proc.body));
  EXPECT_EQ(db.clock() - start, res.steps);
  EXPECT_EQ(res.env.scalar("b"), Value::integer(2));
}

TEST(Runtime, LoopWithDmlWritesVersionsAtIncreasingTimes) {
  Database db;
  db.create_table({"L", {{"k", Type::Int}, {"v", Type::Int}}, {"k"}});
  auto proc = parse_procedure(
      "PROCEDURE p() BEGIN DECLARE i INT = 0; WHILE i < 50 DO INSERT INTO L VALUES (:i, :i * 2); i = i + 1; "
      "END WHILE; END");
  Recorder rec;
  auto res = run(proc, {}, db, {}, &rec);
  auto h = db.history("L");
  ASSERT_EQ(h.size(), 50u);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LT(h[i - 1].valid_from, h[i].valid_from);
  // 1 init + 50 * (cond + insert + incr) + final cond
  EXPECT_EQ(res.steps, 1u + 50u * 3u + 1u);
  EXPECT_EQ(res.end_clock - res.start_clock, res.steps);
  std::size_t loop_iters = 0;
  for (const auto& r : rec.steps) loop_iters += r.kind == StepKind::LoopIter;
  EXPECT_EQ(loop_iters, 51u);
  EXPECT_EQ(rec.steps.back().condition, std::optional<bool>(false));
  for (std::size_t i = 0; i < rec.steps.size(); ++i) EXPECT_EQ(rec.steps[i].step, res.start_clock + 1 + i);
}

TEST(Runtime, PayOrdersLedger) {
  Database db;
  load_fixture(db, data_path("fixtures/table1"));
  auto proc = parse_procedure(read_data("fixtures/table1/pay_orders.proc"));
  Environment args;
  args.set_scalar("project", Value::integer(1));
  Recorder rec;
  auto res = run(proc, args, db, {}, &rec);
  EXPECT_EQ(res.start_clock, 1u);
  EXPECT_EQ(res.end_clock, 17u);
  auto budget = [&](int64_t id, LogicalTime at) {
    for (const auto& row : db.scan_asof("Projects", at).rows) {
      if (row[0] == Value::integer(id)) return row[2].as_int();
    }
    throw std::runtime_error("no project");
  };
  std::vector<int64_t> budgets;
  for (const auto& r : rec.steps) {
    if (r.kind == StepKind::Dml && r.statement == 11) budgets.push_back(budget(1, r.step));  // the budget UPDATE
  }
  EXPECT_EQ(budgets, (std::vector<int64_t>{200, -300}));
  EXPECT_EQ(budget(1, 1), 1200);
  EXPECT_EQ(budget(1, db.clock()), 1200 - 1000 - 500);
  EXPECT_EQ(budget(2, db.clock()), 5000);
  EXPECT_TRUE(res.env.scalar("order_id").is_null());
  EXPECT_EQ(res.env.table("open_orders")->size(), 0u);
}

TEST(Runtime, StepOutcomes) {
  Database db;
  db.create_table({"L", {{"k", Type::Int}}, {"k"}});
  auto proc = parse_procedure(
      "PROCEDURE p() BEGIN DECLARE t TABLE; IF 1 = 1 THEN t = SELECT k FROM L; END IF; "
      "IF NULL = 1 THEN t = SELECT k FROM L; END IF; END");
  Recorder rec;
  auto res = run(proc, {}, db, {}, &rec);
  ASSERT_EQ(rec.steps.size(), 3u);
  EXPECT_EQ(rec.steps[0].kind, StepKind::Branch);
  EXPECT_EQ(rec.steps[0].condition, std::optional<bool>(true));
  EXPECT_EQ(rec.steps[1].kind, StepKind::AssignTable);
  EXPECT_EQ(rec.steps[1].row_count, std::optional<uint64_t>(0));
  EXPECT_EQ(rec.steps[1].parent, std::optional<LogicalTime>(rec.steps[0].step));
  EXPECT_EQ(rec.steps[2].condition, std::optional<bool>(false));  // NULL counts as false
  EXPECT_EQ(res.env.table("t")->size(), 0u);
}

TEST(Runtime, Errors) {
  Database db;
  auto loop = parse_procedure("PROCEDURE p() BEGIN DECLARE i INT = 0; WHILE 1 = 1 DO i = i + 1; END WHILE; END");
  EXPECT_EQ(code_of([&] { run(loop, {}, db, {100, false}); }), ErrorCode::StepLimitExceeded);

  auto bad = parse_procedure("PROCEDURE p() BEGIN DECLARE x INT = 1; x = x / 0; END");
  try {
    run(bad, {}, db);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivisionByZero);
    EXPECT_EQ(e.statement_id(), std::optional<uint32_t>(2));
  }

  auto not_bool = parse_procedure("PROCEDURE p() BEGIN IF 1 THEN END IF; END");
  EXPECT_EQ(code_of([&] { run(not_bool, {}, db); }), ErrorCode::TypeMismatch);

  auto typed = parse_procedure("PROCEDURE p(IN n INT) BEGIN DECLARE s VARCHAR(5) = 'x'; s = n; END");
  Environment args;
  args.set_scalar("n", Value::integer(1));
  EXPECT_EQ(code_of([&] { run(typed, args, db); }), ErrorCode::TypeMismatch);
  EXPECT_EQ(code_of([&] { run(typed, {}, db); }), ErrorCode::InvalidQuery);
  args.set_scalar("m", Value::integer(1));
  EXPECT_EQ(code_of([&] { run(typed, args, db); }), ErrorCode::InvalidQuery);

  db.create_table({"L", {{"k", Type::Int}}, {"k"}});
  auto multi = parse_procedure("PROCEDURE p() BEGIN DECLARE x INT; INSERT INTO L VALUES (1), (2); x = SELECT k FROM L; END");
  EXPECT_EQ(code_of([&] { run(multi, {}, db); }), ErrorCode::InvalidQuery);
}

TEST(Runtime, FailedRunKeepsEarlierEffects) {
  Database db;
  db.create_table({"L", {{"k", Type::Int}}, {"k"}});
  auto proc = parse_procedure("PROCEDURE p() BEGIN INSERT INTO L VALUES (1); INSERT INTO L VALUES (1); END");
  EXPECT_EQ(code_of([&] { run(proc, {}, db); }), ErrorCode::PrimaryKeyViolation);
  EXPECT_EQ(db.scan_asof("L", db.clock()).size(), 1u);
}

TEST(Runtime, TableArgumentIsSnapshotted) {
  Database db;
  auto proc = parse_procedure("PROCEDURE p(IN t TABLE) BEGIN DECLARE n INT; n = SELECT COUNT(*) FROM :t; END");
  Environment args;
  args.set_table("t", shrink_argument());
  auto res = run(proc, args, db);
  EXPECT_EQ(res.env.scalar("n"), Value::integer(5));
  EXPECT_EQ(*res.env.table("t"), shrink_argument());
  Environment wrong;
  wrong.set_scalar("t", Value::integer(1));
  EXPECT_EQ(code_of([&] { run(proc, wrong, db); }), ErrorCode::TypeMismatch);
}

// Tracing only adds rows to the trace tables.
TEST(Runtime, TracingOnOffEquivalence) {
  for (const auto& fp : fixture_procedures()) {
    SCOPED_TRACE(fp.name);
    Database plain;
    load_fixture(plain, data_path("fixtures/table1"));
    auto traced = plain.clone();
    auto proc = parse_procedure(fp.source);
    auto a = run(proc, fp.args, plain);
    auto b = run_traced(proc, fp.source, fp.args, *traced);
    ASSERT_TRUE(b.result) << (b.error ? b.error->what() : "");
    EXPECT_TRUE(a.env == b.result->env);
    EXPECT_EQ(a.steps, b.result->steps);
    EXPECT_EQ(plain.clock(), traced->clock());
    for (const auto& t : plain.table_names()) {
      auto ha = plain.history(t);
      auto hb = traced->history(t);
      ASSERT_EQ(ha.size(), hb.size()) << t;
      for (std::size_t i = 0; i < ha.size(); ++i) {
        EXPECT_EQ(ha[i].values, hb[i].values);
        EXPECT_EQ(ha[i].valid_from, hb[i].valid_from);
        EXPECT_EQ(ha[i].valid_to, hb[i].valid_to);
      }
    }
  }
}
