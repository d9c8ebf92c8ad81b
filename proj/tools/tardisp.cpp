// tardisp: run, serve, query and bench front-ends.

#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iostream>

#include "tardisp/debug_service.hpp"
#include "tardisp/fixture.hpp"
#include "tardisp/parser.hpp"

using namespace tardisp;

namespace {

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

Environment parse_args_json(const std::string& text) {
  if (text.empty()) return {};
  return arguments_from_json(Json::parse(text));
}

void print_environment(const Environment& env) {
  for (const auto& [name, b] : env.bindings()) {
    if (const auto* v = std::get_if<Value>(&b)) {
      std::cout << name << " = " << to_sql_literal(*v) << "\n";
    } else {
      const auto& rel = *std::get<TableBinding>(b);
      std::cout << name << " (" << rel.size() << " rows)\n" << to_display(rel) << "\n";
    }
  }
}

std::string cell_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Plain-text rendering of a /query payload.
void print_payload(const Json& j) {
  if (j.value("kind", "") == "relation") {
    std::vector<std::string> names;
    for (const auto& c : j["columns"]) names.push_back(c["name"].get<std::string>());
    for (std::size_t i = 0; i < names.size(); ++i) std::cout << (i ? " | " : "") << names[i];
    std::cout << "\n";
    for (const auto& row : j["rows"]) {
      for (std::size_t i = 0; i < row.size(); ++i) std::cout << (i ? " | " : "") << cell_text(row[i]);
      std::cout << "\n";
    }
    std::cout << "(" << j["total_rows"] << " rows";
    if (j["rows"].size() < j["total_rows"].get<std::size_t>()) std::cout << ", showing " << j["rows"].size();
    std::cout << ")\n";
    return;
  }
  if (j.value("kind", "") == "diff") {
    std::cout << "steps:";
    for (std::size_t i = 0; i < j["step_names"].size(); ++i) {
      std::cout << " " << cell_text(j["step_names"][i]) << "=" << j["steps"][i];
    }
    std::cout << "\n";
    const auto& cols = j["columns"];
    for (std::size_t i = 0; i < cols.size(); ++i) std::cout << (i ? " | " : "") << cell_text(cols[i]);
    std::cout << "\n";
    for (const auto& row : j["rows"]) {
      bool first = true;
      for (const auto& k : row["key"]) {
        std::cout << (first ? "" : " | ") << cell_text(k);
        first = false;
      }
      for (const auto& c : row["cells"]) {
        std::cout << " | ";
        for (std::size_t s = 0; s < c["values"].size(); ++s) {
          if (s) std::cout << (c["changed"][s - 1].get<bool>() ? " -> " : " = ");
          std::cout << (c["present"][s].get<bool>() ? cell_text(c["values"][s]) : "-");
        }
        if (!c["jump_step"].is_null()) std::cout << " @" << c["jump_step"];
      }
      std::cout << "\n";
    }
    return;
  }
  std::cout << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Back-in-time debugger for stored procedures"};
  app.require_subcommand(1);

  // run
  std::string run_proc, run_fixture, run_args;
  bool run_trace = false, run_views = false;
  auto* run_cmd = app.add_subcommand("run", "Run a procedure against a fixture");
  run_cmd->add_option("proc", run_proc, "Procedure file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--fixture", run_fixture, "Fixture directory")->required()->check(CLI::ExistingDirectory);
  run_cmd->add_option("--args", run_args, "Arguments as a JSON object");
  run_cmd->add_flag("--trace", run_trace, "Record a trace");
  run_cmd->add_flag("--views", run_views, "Print the reconstruction view definitions");

  // serve
  std::string serve_fixture, serve_host = "127.0.0.1", serve_static;
  int serve_port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the debugger HTTP API");
  serve_cmd->add_option("--port", serve_port, "Port (0 picks one)");
  serve_cmd->add_option("--host", serve_host, "Bind address");
  serve_cmd->add_option("--fixture", serve_fixture, "Fixture directory")->required()->check(CLI::ExistingDirectory);
  serve_cmd->add_option("--static", serve_static, "Directory of UI assets served at /")->check(CLI::ExistingDirectory);

  // query
  std::string q_session, q_sql, q_server = "http://127.0.0.1:8080";
  bool q_json = false;
  auto* query_cmd = app.add_subcommand("query", "Send a console query to a running server");
  query_cmd->add_option("--session", q_session, "Session id")->required();
  query_cmd->add_option("sql", q_sql, "Query text")->required();
  query_cmd->add_option("--server", q_server, "Server base URL");
  query_cmd->add_flag("--json", q_json, "Print the raw JSON payload");

  // bench
  std::string b_fixture, b_out;
  std::vector<std::string> b_procs, b_args, b_queries;
  std::size_t b_reps = 5, b_generate = 0, b_projects = 1000;
  auto* bench_cmd = app.add_subcommand("bench", "Measure plain/traced/reproduce and single/time-diff timings");
  bench_cmd->add_option("--fixture", b_fixture, "Fixture directory")->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--proc", b_procs, "Procedure files")->check(CLI::ExistingFile);
  bench_cmd->add_option("--args", b_args, "Argument set (JSON object), repeatable");
  bench_cmd->add_option("--diff-query", b_queries, "Time-diff query without AT STEP, repeatable");
  bench_cmd->add_option("--reps", b_reps, "Repetitions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--generate", b_generate, "Generate this many order rows instead of a fixture");
  bench_cmd->add_option("--projects", b_projects, "Projects when generating");
  bench_cmd->add_option("--out", b_out, "Report file (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto source = read_text_file(run_proc);
      auto proc = parse_procedure(source);
      Database db;
      load_fixture(db, run_fixture);
      auto args = parse_args_json(run_args);
      if (run_views) std::cout << emit_reconstruction_views(proc) << "\n";
      if (!run_trace) {
        auto r = run(proc, args, db);
        std::cout << "steps: " << r.steps << " (clock " << r.start_clock << " -> " << r.end_clock << ")\n";
        print_environment(r.env);
        return 0;
      }
      auto tr = run_traced(proc, source, args, db);
      auto trace = load_trace(db, tr.trace_id);
      std::cout << "trace " << tr.trace_id << ": " << trace.events.size() << " steps (" << trace.first_step() << ".."
                << trace.last_step() << ")\n";
      for (const auto& e : trace.events) {
        std::cout << "  " << e.step << "  stmt " << e.statement_id << "  " << step_kind_name(e.kind);
        if (e.var) std::cout << "  " << *e.var;
        if (e.row_count) std::cout << "  rows=" << *e.row_count;
        if (e.condition) std::cout << "  " << (*e.condition ? "true" : "false");
        std::cout << "\n";
      }
      if (tr.error) {
        std::cerr << error_to_json(*tr.error).dump() << "\n";
        return 1;
      }
      print_environment(tr.result->env);
      return 0;
    }

    if (*serve_cmd) {
      auto db = std::make_shared<Database>();
      load_fixture(*db, serve_fixture);
      SessionManager sessions(db);
      std::optional<std::filesystem::path> static_dir;
      if (!serve_static.empty()) static_dir = serve_static;
      ApiServer server(sessions, static_dir);
      int port = server.bind(serve_host, serve_port);
      if (port < 0) {
        std::cerr << "cannot bind " << serve_host << ":" << serve_port << "\n";
        return 1;
      }
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << serve_host << ":" << port << std::endl;
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (*query_cmd) {
      httplib::Client cli(q_server);
      auto res = cli.Post("/sessions/" + q_session + "/query", Json{{"sql", q_sql}}.dump(), "application/json");
      if (!res) {
        std::cerr << "request failed: " << httplib::to_string(res.error()) << "\n";
        return 2;
      }
      Json body = Json::parse(res->body);
      if (res->status >= 300) {
        std::cerr << body.value("error", "") << ": " << body.value("message", "");
        if (body.contains("line")) std::cerr << " (line " << body["line"] << ", col " << body["col"] << ")";
        std::cerr << "\n";
        return 1;
      }
      if (q_json) {
        std::cout << body.dump(2) << "\n";
      } else {
        print_payload(body);
      }
      return 0;
    }

    if (*bench_cmd) {
      Database base;
      std::vector<BenchCase> cases;
      if (b_generate > 0) {
        generate_bench_data(base, b_projects, b_generate, 42);
        cases.push_back(default_bench_case(b_projects));
      } else {
        if (b_fixture.empty() || b_procs.empty()) {
          std::cerr << "bench needs --fixture and --proc, or --generate\n";
          return 2;
        }
        load_fixture(base, b_fixture);
      }
      for (const auto& file : b_procs) {
        BenchCase c;
        c.procedure = read_text_file(file);
        c.name = parse_procedure(c.procedure).name;
        for (const auto& a : b_args) c.argument_sets.push_back(parse_args_json(a));
        if (c.argument_sets.empty()) c.argument_sets.emplace_back();
        c.diff_queries = b_queries;
        cases.push_back(std::move(c));
      }
      auto report = run_bench(base, cases, b_reps);
      auto j = report.to_json();
      if (!b_out.empty()) {
        std::ofstream(b_out) << j.dump(2) << "\n";
      }
      for (const auto& e : report.entries) {
        std::cout << e.procedure << " " << e.arguments << ": plain " << e.plain << " ms, traced " << e.traced
                  << " ms (x" << e.traced_over_plain() << "), reproduce " << e.reproduce << " ms"
                  << (e.reproduce_matches ? "" : " MISMATCH") << "\n";
        for (const auto& q : e.queries) {
          std::cout << "  single " << q.single << " ms, time-diff " << q.diff << " ms (x" << q.diff_over_single() << ")\n";
        }
      }
      return report.all_reproduced() ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << error_to_json(e).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
