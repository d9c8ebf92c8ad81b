#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tardisp/json_codec.hpp"
#include "tardisp/timetravel.hpp"
#include "tardisp/tracer.hpp"

namespace tardisp {

enum class NavOp { Forward, Back, To, Into, Over, Out };

std::optional<NavOp> parse_nav_op(std::string_view name);

struct NavResult {
  LogicalTime cursor = 0;
  bool clamped = false;
};

/// Pure navigation over a trace; `to` is only read for NavOp::To.
NavResult navigate_tree(const Trace& trace, const ExecutionTree& tree, LogicalTime cursor, NavOp op,
                        std::optional<LogicalTime> to = std::nullopt);

struct VariableView {
  std::string name;
  bool is_table = false;
  bool bound = false;  // false before the first assignment
  std::optional<Value> value;           // scalars
  std::optional<uint64_t> row_count;    // tables
  std::optional<LogicalTime> assigned_at;
};

/// One traced run opened for debugging. Everything after construction is a
/// read, except the cursor and bookmarks, which have their own lock.
class Session {
 public:
  /// Parses, instruments and runs `procedure_text` with tracing on. A run
  /// that fails at runtime still yields a session over its partial trace
  /// (see run_error()); parse errors throw.
  static std::shared_ptr<Session> create(std::string id, std::shared_ptr<Database> db,
                                         const std::string& procedure_text, const Environment& args);

  /// Re-opens a trace stored in `db`.
  static std::shared_ptr<Session> open(std::string id, std::shared_ptr<Database> db, TraceId trace_id);

  const std::string& id() const { return id_; }
  const Trace& trace() const { return trace_; }
  const ExecutionTree& tree() const { return tree_; }
  const ProcedureAst& procedure() const { return *trace_.procedure; }
  const Reconstructor& reconstructor() const { return *rc_; }
  const Database& db() const { return *db_; }
  bool empty() const { return trace_.empty(); }

  LogicalTime cursor() const;
  NavResult navigate(NavOp op, std::optional<LogicalTime> to = std::nullopt);

  /// Throws UnknownStep unless the step is inside the trace.
  LogicalTime resolve_step(std::optional<LogicalTime> step) const;

  std::vector<VariableView> variables(std::optional<LogicalTime> step = std::nullopt) const;
  Binding variable(const std::string& name, std::optional<LogicalTime> step = std::nullopt) const;
  std::optional<LogicalTime> assignment(const std::string& name, std::optional<LogicalTime> step,
                                        NavDirection dir) const;

  /// Console: runs at the cursor unless the text has AT STEP.
  ConsoleResult query(std::string_view text) const;

  void set_bookmark(const std::string& name, std::optional<LogicalTime> step = std::nullopt);
  std::map<std::string, LogicalTime> bookmarks() const;

 private:
  Session(std::string id, std::shared_ptr<Database> db, Trace trace);

  std::string id_;
  std::shared_ptr<Database> db_;
  Trace trace_;
  QueryRegistry registry_;
  ExecutionTree tree_;
  std::unique_ptr<Reconstructor> rc_;

  mutable std::mutex mu_;
  LogicalTime cursor_ = 0;
  std::map<std::string, LogicalTime> bookmarks_;
};

/// Sessions by id. Sessions created without a fixture share `db`.
class SessionManager {
 public:
  explicit SessionManager(std::shared_ptr<Database> db) : db_(std::move(db)) {}

  std::shared_ptr<Session> create(const std::string& procedure_text, const Environment& args,
                                  const std::optional<std::filesystem::path>& fixture_dir = std::nullopt);
  std::shared_ptr<Session> open(TraceId trace_id);
  /// Throws UnknownSession.
  std::shared_ptr<Session> get(const std::string& id) const;
  std::vector<std::string> ids() const;
  const std::shared_ptr<Database>& db() const { return db_; }

 private:
  std::string next_id();

  std::shared_ptr<Database> db_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  uint64_t counter_ = 0;
};

// --- JSON payloads -------------------------------------------------------

inline constexpr std::size_t kPageSize = 500;

/// Arguments object: each member is a JSON scalar, a relation
/// `{"columns": [...], "rows": [...]}`, or a tagged binding
/// `{"kind": "scalar"|"table", ...}`.
Environment arguments_from_json(const Json& j);

Json error_to_json(const Error& e);
Json diff_to_json(const DiffTable& d);
Json relation_page_json(const Relation& rel, std::size_t offset, std::size_t limit);
Json console_result_json(const ConsoleResult& r, std::size_t offset = 0, std::size_t limit = kPageSize);
Json variable_view_json(const VariableView& v);
Json tree_json(const ExecutionTree& tree);
Json source_json(const Trace& trace);
Json session_summary_json(const Session& s);

// --- HTTP API ------------------------------------------------------------

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> params;  // query string
  std::string body;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

int http_status_for(ErrorCode code);

/// Transport-independent router; the HTTP server and tests both call it.
class ApiRouter {
 public:
  explicit ApiRouter(SessionManager& sessions) : sessions_(sessions) {}
  ApiResponse handle(const ApiRequest& req) const;

 private:
  Json dispatch(const ApiRequest& req, int& status) const;
  SessionManager& sessions_;
};

/// Blocking HTTP server around the router (plus static files from
/// `static_dir` at `/`, when given). Returns when stop() is called.
class ApiServer {
 public:
  ApiServer(SessionManager& sessions, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ApiServer();
  /// Port 0 picks a free port; returns the bound port, or -1.
  int bind(const std::string& host, int port);
  void listen();  // after bind
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// --- bench ---------------------------------------------------------------

struct BenchCase {
  std::string name;
  std::string procedure;
  std::vector<Environment> argument_sets;  // one measurement per set
  // Time-diff queries without AT STEP, run at the first, middle and last
  // step; the baseline is one partial execution at the middle step.
  std::vector<std::string> diff_queries;
};

struct QueryTiming {
  std::string sql;  // the time-diff query, AT STEP included
  std::vector<double> single_ms, diff_ms;
  double single = 0, diff = 0;  // medians
  double diff_over_single() const { return diff / single; }
};

struct BenchEntry {
  std::string procedure;
  std::string arguments;  // JSON text
  uint64_t steps = 0;
  std::vector<double> plain_ms, traced_ms, reproduce_ms;
  double plain = 0, traced = 0, reproduce = 0;  // medians
  bool reproduce_matches = false;
  std::vector<QueryTiming> queries;

  double traced_over_plain() const { return traced / plain; }
  double reproduce_over_plain() const { return reproduce / plain; }
};

struct BenchReport {
  std::size_t repetitions = 0;
  std::size_t base_rows = 0;
  std::vector<BenchEntry> entries;

  double max_traced_over_plain() const;
  double max_diff_over_single() const;
  bool all_reproduced() const;
  Json to_json() const;
};

/// Each repetition runs on a fresh copy of `base`.
BenchReport run_bench(const Database& base, const std::vector<BenchCase>& cases, std::size_t repetitions);

/// Synthetic Projects/PurchaseOrders data of about `orders` order rows.
void generate_bench_data(Database& db, std::size_t projects, std::size_t orders, uint64_t seed);

/// The procedure and queries the bench uses on generated data; argument sets
/// select small, medium and large intermediate results.
BenchCase default_bench_case(std::size_t projects);

double median(std::vector<double> xs);

}  // namespace tardisp
