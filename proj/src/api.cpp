#include <charconv>

#include <httplib.h>

#include "tardisp/debug_service.hpp"

namespace tardisp {

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
      return 404;
    case ErrorCode::MalformedTrace:
      return 500;
    default:
      return 400;
  }
}

namespace {

struct NotFound {
  std::string what;
};

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) parts.push_back(path.substr(i, j - i));
    i = j;
  }
  return parts;
}

uint64_t parse_uint(const std::string& name, const std::string& text) {
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error(ErrorCode::BadRequest, name + " must be a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::optional<uint64_t> uint_param(const ApiRequest& req, const std::string& name) {
  auto it = req.params.find(name);
  if (it == req.params.end() || it->second.empty()) return std::nullopt;
  return parse_uint(name, it->second);
}

std::optional<uint64_t> uint_field(const Json& body, const std::string& name) {
  if (!body.contains(name) || body[name].is_null()) return std::nullopt;
  if (!body[name].is_number_unsigned() && !(body[name].is_number_integer() && body[name].get<int64_t>() >= 0)) {
    throw Error(ErrorCode::BadRequest, name + " must be a non-negative integer");
  }
  return body[name].get<uint64_t>();
}

Json parse_body(const ApiRequest& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::BadRequest, std::string("invalid JSON body: ") + e.what());
  }
}

std::string string_field(const Json& body, const std::string& name) {
  if (!body.contains(name) || !body[name].is_string()) throw Error(ErrorCode::BadRequest, "missing string field " + name);
  return body[name].get<std::string>();
}

}  // namespace

ApiResponse ApiRouter::handle(const ApiRequest& req) const {
  ApiResponse res;
  try {
    res.body = dispatch(req, res.status);
  } catch (const Error& e) {
    res.status = http_status_for(e.code());
    res.body = error_to_json(e);
  } catch (const NotFound& nf) {
    res.status = 404;
    res.body = {{"error", "NotFound"}, {"message", nf.what}};
  } catch (const Json::exception& e) {
    res.status = 400;
    res.body = {{"error", error_code_name(ErrorCode::BadRequest)}, {"message", e.what()}};
  } catch (const std::exception& e) {
    res.status = 500;
    res.body = {{"error", "Internal"}, {"message", e.what()}};
  }
  return res;
}

Json ApiRouter::dispatch(const ApiRequest& req, int& status) const {
  const auto parts = split_path(req.path);
  const bool get = req.method == "GET", post = req.method == "POST";
  auto not_found = [&]() -> Json { throw NotFound{"no route " + req.method + " " + req.path}; };

  if (parts.empty()) return not_found();
  if (parts.size() == 1 && parts[0] == "health" && get) return {{"ok", true}};
  if (parts.size() == 1 && parts[0] == "traces" && get) return list_traces(*sessions_.db());
  if (parts[0] != "sessions") return not_found();

  if (parts.size() == 1) {
    if (get) {
      Json out = Json::array();
      for (const auto& id : sessions_.ids()) out.push_back(session_summary_json(*sessions_.get(id)));
      return out;
    }
    if (!post) return not_found();
    Json body = parse_body(req);
    std::shared_ptr<Session> s;
    if (auto trace_id = uint_field(body, "trace_id")) {
      s = sessions_.open(static_cast<TraceId>(*trace_id));
    } else {
      std::optional<std::filesystem::path> fixture;
      if (body.contains("fixture_dir") && !body["fixture_dir"].is_null()) fixture = string_field(body, "fixture_dir");
      s = sessions_.create(string_field(body, "procedure"), arguments_from_json(body.value("args", Json())), fixture);
    }
    status = 201;
    return session_summary_json(*s);
  }

  auto session = sessions_.get(parts[1]);
  if (parts.size() == 2 && get) return session_summary_json(*session);
  if (parts.size() < 3) return not_found();
  const std::string& what = parts[2];

  if (parts.size() == 3 && what == "tree" && get) return tree_json(session->tree());
  if (parts.size() == 3 && what == "source" && get) return source_json(session->trace());
  if (parts.size() == 3 && what == "navigate" && post) {
    Json body = parse_body(req);
    auto op = parse_nav_op(string_field(body, "op"));
    if (!op) throw Error(ErrorCode::BadRequest, "unknown navigation op " + body["op"].dump());
    auto r = session->navigate(*op, uint_field(body, "step"));
    return {{"cursor", r.cursor}, {"clamped", r.clamped}};
  }
  if (parts.size() == 3 && what == "query" && post) {
    Json body = parse_body(req);
    auto offset = uint_field(body, "offset").value_or(0);
    auto limit = uint_field(body, "limit").value_or(kPageSize);
    return console_result_json(session->query(string_field(body, "sql")), offset, limit);
  }
  if (parts.size() == 3 && what == "bookmarks") {
    if (post) {
      Json body = parse_body(req);
      session->set_bookmark(string_field(body, "name"), uint_field(body, "step"));
    } else if (!get) {
      return not_found();
    }
    Json out = Json::object();
    for (const auto& [name, step] : session->bookmarks()) out[name] = step;
    return out;
  }
  if (what == "variables" && get) {
    auto step = uint_param(req, "step");
    if (parts.size() == 3) {
      Json out = Json::array();
      for (const auto& v : session->variables(step)) out.push_back(variable_view_json(v));
      return out;
    }
    const std::string& name = parts[3];
    if (parts.size() == 4) {
      auto b = session->variable(name, step);
      if (const auto* v = std::get_if<Value>(&b)) return {{"kind", "scalar"}, {"value", value_to_json(*v)}};
      return relation_page_json(*std::get<TableBinding>(b), uint_param(req, "offset").value_or(0),
                                uint_param(req, "limit").value_or(kPageSize));
    }
    if (parts.size() == 5 && parts[4] == "assignments") {
      auto dir_it = req.params.find("dir");
      std::string dir = dir_it == req.params.end() ? "prev" : dir_it->second;
      if (dir != "prev" && dir != "next") throw Error(ErrorCode::BadRequest, "dir must be prev or next");
      auto s = session->assignment(name, step, dir == "prev" ? NavDirection::Prev : NavDirection::Next);
      return {{"step", s ? Json(*s) : Json(nullptr)}};
    }
  }
  return not_found();
}

struct ApiServer::Impl {
  explicit Impl(SessionManager& s) : router(s) {}
  ApiRouter router;
  httplib::Server server;
};

ApiServer::ApiServer(SessionManager& sessions, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(sessions)) {
  if (static_dir) impl_->server.set_mount_point("/", static_dir->string());
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest ar{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) ar.params[k] = v;
    auto out = impl_->router.handle(ar);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  impl_->server.Get(R"(/.*)", handler);
  impl_->server.Post(R"(/.*)", handler);
  impl_->server.Put(R"(/.*)", handler);
  impl_->server.Delete(R"(/.*)", handler);
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace tardisp
