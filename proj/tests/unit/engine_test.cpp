#include <gtest/gtest.h>

#include "paths.hpp"
#include "properties.hpp"
#include "tardisp/engine.hpp"
#include "tardisp/fixture.hpp"
#include "tardisp/parser.hpp"

using namespace tardisp;
using tardisp::testing::data_path;

namespace {

class Table1 : public ::testing::Test {
 protected:
  void SetUp() override { load_fixture(db, data_path("fixtures/table1")); }

  Relation q(const std::string& sql, LogicalTime at = 1) { return evaluate(parse_query(sql), env, db, at); }

  Value one(const std::string& sql, LogicalTime at = 1) {
    auto rel = q(sql, at);
    EXPECT_EQ(rel.size(), 1u);
    EXPECT_EQ(rel.arity(), 1u);
    return rel.rows.at(0).at(0);
  }

  Statement stmt(const std::string& text) {
    auto proc = parse_procedure("PROCEDURE p(IN v TABLE, IN n INT) BEGIN " + text + " END");
    return proc.body.at(0);
  }

  ErrorCode error_of(const std::string& sql) {
    try {
      q(sql);
    } catch (const Error& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error for " << sql;
    return ErrorCode::BadRequest;
  }

  Database db;
  Environment env;
};

Row ints(std::initializer_list<int64_t> v) {
  Row r;
  for (auto x : v) r.push_back(Value::integer(x));
  return r;
}

}  // namespace

TEST_F(Table1, SumOfOpenOrders) {
  EXPECT_EQ(one("SELECT SUM(total) FROM PurchaseOrders WHERE status = 'open'"), Value::integer(1000 + 500 + 700));
  EXPECT_EQ(one("SELECT SUM(total) FROM PurchaseOrders WHERE status = 'open' AND project_id = 1"),
            Value::integer(1500));
}

TEST_F(Table1, BeforeAnyInsert) {
  EXPECT_TRUE(one("SELECT SUM(total) FROM PurchaseOrders", 0).is_null());
  EXPECT_EQ(one("SELECT COUNT(*) FROM PurchaseOrders", 0), Value::integer(0));
  EXPECT_TRUE(q("SELECT id FROM PurchaseOrders", 0).empty());
  // grouped over nothing: no groups at all
  EXPECT_TRUE(q("SELECT project_id, COUNT(*) FROM PurchaseOrders GROUP BY project_id", 0).empty());
}

TEST_F(Table1, ListingOneShape) {
  Relation sel;
  sel.columns = {Column{"id", Type::Int, {}}, Column{"name", Type::Text, {}}, Column{"budget", Type::Int, {}}};
  sel.rows = {{Value::integer(1), Value::text("Project 1"), Value::integer(1200)}};
  env.set_table("selected_projects", sel);
  auto ast = parse_query(tardisp::testing::read_data("fixtures/queries/listing1_table1.sql"));
  ast.at_step.reset();
  auto rel = evaluate(ast, env, db, 1);
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_EQ(rel.columns[0].name, "pr.id");
  EXPECT_EQ(rel.columns[3].name, "SUM(po.total)");
  EXPECT_EQ(rel.rows[0], (Row{Value::integer(1), Value::text("Project 1"), Value::integer(1200), Value::integer(1500)}));
}

TEST_F(Table1, OutputNamesAndOrder) {
  auto rel = q("SELECT po.id, po.total * 2 AS dbl, po.total + 1 FROM PurchaseOrders po ORDER BY dbl DESC LIMIT 2");
  ASSERT_EQ(rel.arity(), 3u);
  EXPECT_EQ(rel.columns[0].name, "po.id");
  EXPECT_EQ(rel.columns[1].name, "dbl");
  EXPECT_EQ(rel.columns[2].name, "po.total + 1");
  ASSERT_EQ(rel.size(), 2u);
  EXPECT_EQ(rel.rows[0], ints({1, 2000, 1001}));
  EXPECT_EQ(rel.rows[1], ints({3, 1400, 701}));

  auto star = q("SELECT * FROM Projects p JOIN PurchaseOrders o ON o.project_id = p.id WHERE o.id = 4");
  EXPECT_EQ(star.columns[0].name, "p.id");
  EXPECT_EQ(star.columns[3].name, "o.id");
  EXPECT_EQ(star.size(), 1u);
}

TEST_F(Table1, DefaultOrderIsByRow) {
  auto rel = q("SELECT status, total FROM PurchaseOrders");
  ASSERT_EQ(rel.size(), 4u);
  EXPECT_EQ(rel.rows[0][0], Value::text("open"));
  EXPECT_EQ(rel.rows[0][1], Value::integer(500));
  EXPECT_EQ(rel.rows[3][0], Value::text("paid"));
}

TEST_F(Table1, LeftJoinKeepsUnmatched) {
  auto rel = q(
      "SELECT p.id, COUNT(o.id) AS n, SUM(o.total) AS s FROM Projects p LEFT JOIN PurchaseOrders o "
      "ON o.project_id = p.id AND o.status = 'paid' GROUP BY p.id");
  ASSERT_EQ(rel.size(), 2u);
  EXPECT_EQ(rel.rows[0], (Row{Value::integer(1), Value::integer(0), Value{}}));
  EXPECT_EQ(rel.rows[1], ints({2, 1, 300}));
}

TEST_F(Table1, CorrelatedExists) {
  auto rel = q(
      "SELECT p.id FROM Projects p WHERE EXISTS (SELECT 1 FROM PurchaseOrders o WHERE o.project_id = p.id AND "
      "o.status = 'paid')");
  ASSERT_EQ(rel.size(), 1u);
  EXPECT_EQ(rel.rows[0], ints({2}));
}

TEST_F(Table1, Errors) {
  EXPECT_EQ(error_of("SELECT x FROM Projects"), ErrorCode::UnknownColumn);
  EXPECT_EQ(error_of("SELECT id FROM Nope"), ErrorCode::UnknownTable);
  EXPECT_EQ(error_of("SELECT id FROM Projects p JOIN PurchaseOrders o ON o.id = p.id"), ErrorCode::AmbiguousColumn);
  EXPECT_EQ(error_of("SELECT id FROM :missing"), ErrorCode::UnboundVariable);
  EXPECT_EQ(error_of("SELECT name + 1 FROM Projects"), ErrorCode::TypeMismatch);
  EXPECT_EQ(error_of("SELECT budget / 0 FROM Projects"), ErrorCode::DivisionByZero);
  EXPECT_EQ(error_of("SELECT 9223372036854775807 + budget FROM Projects"), ErrorCode::NumericOverflow);
  EXPECT_EQ(error_of("SELECT id FROM Projects WHERE budget"), ErrorCode::TypeMismatch);
  EXPECT_EQ(error_of("SELECT id FROM Projects AT STEP 1"), ErrorCode::InvalidQuery);
}

TEST_F(Table1, Scalars) {
  auto s = [&](const std::string& e) { return evaluate_scalar(parse_expression(e), env, db, 1); };
  EXPECT_EQ(s("1 + 1"), Value::integer(2));
  EXPECT_TRUE(s("NULL = NULL").is_null());
  EXPECT_EQ(s("NULL IS NULL"), Value::boolean(true));
  EXPECT_EQ(s("NULL OR TRUE"), Value::boolean(true));
  EXPECT_TRUE(s("NULL AND TRUE").is_null());
  EXPECT_EQ(s("7 / 2"), Value::integer(3));
  EXPECT_EQ(s("-7 % 3"), Value::integer(-1));
  EXPECT_EQ(s("1 / 2.0"), Value::real(0.5));
  EXPECT_EQ(s("2 IN (1, NULL, 2)"), Value::boolean(true));
  EXPECT_TRUE(s("3 IN (1, NULL)").is_null());
  EXPECT_EQ(s("COALESCE(NULL, 4, 1 / 0)"), Value::integer(4));
  EXPECT_EQ(s("CASE WHEN 1 = 2 THEN 1 / 0 ELSE 'ok' END"), Value::text("ok"));
  env.set_scalar("n", Value::integer(5));
  EXPECT_EQ(s(":n * 2"), Value::integer(10));
  EXPECT_EQ(s("EXISTS (SELECT 1 FROM Projects WHERE budget > :n)"), Value::boolean(true));
}

TEST_F(Table1, UpdateCreatesOneVersion) {
  auto before = db.version_count("PurchaseOrders");
  EXPECT_EQ(execute_dml(stmt("UPDATE PurchaseOrders SET status = 'paid' WHERE id = 1;"), env, db), 1u);
  EXPECT_EQ(db.clock(), 2u);
  EXPECT_EQ(db.version_count("PurchaseOrders"), before + 1);
  EXPECT_EQ(one("SELECT status FROM PurchaseOrders WHERE id = 1", 2), Value::text("paid"));
  EXPECT_EQ(one("SELECT status FROM PurchaseOrders WHERE id = 1", 1), Value::text("open"));
}

TEST_F(Table1, FalseDeleteStillTicks) {
  EXPECT_EQ(execute_dml(stmt("DELETE FROM PurchaseOrders WHERE 1 = 0;"), env, db), 0u);
  EXPECT_EQ(db.clock(), 2u);
  EXPECT_EQ(execute_dml(stmt("DELETE FROM PurchaseOrders WHERE status = 'paid';"), env, db), 1u);
  EXPECT_EQ(db.clock(), 3u);
  EXPECT_EQ(q("SELECT id FROM PurchaseOrders", 3).size(), 3u);
}

TEST_F(Table1, InsertSelectFromVariable) {
  Relation v;
  v.columns = {Column{"id", Type::Int, {}}, Column{"total", Type::Int, {}}};
  v.rows = {ints({10, 1}), ints({11, 2}), ints({12, 3})};
  env.set_table("v", v);
  env.set_scalar("n", Value::integer(2));
  EXPECT_EQ(execute_dml(stmt("INSERT INTO PurchaseOrders (id, project_id, total) SELECT id, :n, total FROM :v;"), env, db),
            3u);
  auto rel = q("SELECT id, project_id, status, total FROM PurchaseOrders WHERE id >= 10", 2);
  ASSERT_EQ(rel.size(), 3u);
  EXPECT_EQ(rel.rows[2], (Row{Value::integer(12), Value::integer(2), Value{}, Value::integer(3)}));
  EXPECT_EQ(execute_dml(stmt("INSERT INTO Projects VALUES (3, 'P3', 1 + 1), (4, 'P4', :n);"), env, db), 2u);
  EXPECT_EQ(one("SELECT SUM(budget) FROM Projects WHERE id > 2", 3), Value::integer(4));
  EXPECT_EQ(execute_dml(stmt("UPDATE Projects SET budget = budget - :n WHERE id = 3;"), env, db), 1u);
  EXPECT_EQ(one("SELECT budget FROM Projects WHERE id = 3", 4), Value::integer(0));
}

TEST_F(Table1, EvaluateIsPure) {
  auto clock = db.clock();
  auto versions = db.version_count("PurchaseOrders");
  q("SELECT p.id, SUM(o.total) FROM Projects p JOIN PurchaseOrders o ON o.project_id = p.id GROUP BY p.id");
  EXPECT_EQ(db.clock(), clock);
  EXPECT_EQ(db.version_count("PurchaseOrders"), versions);
}

TEST_F(Table1, LaterWritesDoNotAffectEarlierReads) {
  const std::string sql =
      "SELECT p.name, SUM(o.total) AS s FROM Projects p JOIN PurchaseOrders o ON o.project_id = p.id GROUP BY p.name";
  auto before = q(sql, 1);
  for (int i = 0; i < 5; ++i) {
    execute_dml(stmt("INSERT INTO PurchaseOrders VALUES (" + std::to_string(100 + i) + ", 1, 'open', 5);"), env, db);
    execute_dml(stmt("UPDATE Projects SET budget = budget + 1;"), env, db);
  }
  EXPECT_EQ(q(sql, 1), before);
  EXPECT_NE(q(sql, db.clock()), before);
}

TEST(Engine, MatchesReferenceEvaluator) {
  auto res = tardisp::testing::check_engine_queries(20240611, 1000);
  EXPECT_EQ(res.cases, 1000u);
  EXPECT_TRUE(res.ok()) << res.failures << " mismatches; first: " << res.first_failure;
}

TEST(Engine, ScalarComparisonsMatchReference) {
  std::mt19937_64 rng(77);
  std::vector<Value> vals = {Value{},          Value::integer(-1), Value::integer(0),  Value::integer(3),
                             Value::real(0.0), Value::real(2.5),   Value::real(-1.0),  Value::text("a"),
                             Value::text(""),  Value::boolean(true), Value::boolean(false)};
  const BinaryOp ops[] = {BinaryOp::Eq, BinaryOp::Ne, BinaryOp::Lt, BinaryOp::Le, BinaryOp::Gt, BinaryOp::Ge};
  Database db;
  Environment env;
  tardisp::testing::RefData data;
  for (int i = 0; i < 2000; ++i) {
    const auto& a = vals[rng() % vals.size()];
    const auto& b = vals[rng() % vals.size()];
    auto e = make_binary(ops[rng() % 6], make_literal(a), make_literal(b));
    QueryAst sel;
    sel.select.push_back(SelectItem{e, std::nullopt, std::nullopt});
    std::optional<Value> want, got;
    try {
      want = tardisp::testing::RefEvaluator(data).run(sel).rows.at(0).at(0);
    } catch (const Error&) {
    }
    try {
      got = evaluate_scalar(e, env, db, 0);
    } catch (const Error&) {
    }
    ASSERT_EQ(got.has_value(), want.has_value()) << to_sql_literal(a) << " vs " << to_sql_literal(b);
    if (got) ASSERT_EQ(*got, *want) << to_sql_literal(a) << " vs " << to_sql_literal(b);
  }
}
