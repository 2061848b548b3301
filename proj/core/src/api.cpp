#include "threathive/api.hpp"

#include <mutex>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "threathive/config.hpp"
#include "threathive/error.hpp"
#include "threathive/projections.hpp"
#include "threathive/serialization.hpp"

namespace threathive {

using nlohmann::json;

int http_status(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Validation:
    case ErrorKind::Parse: return 400;
    case ErrorKind::Lookup: return 404;
    case ErrorKind::Conflict: return 409;
    case ErrorKind::Precondition: return 422;
    default: return 500;
  }
}

struct ApiService::Server {
  httplib::Server http;
};

namespace {

ApiResponse reply(int status, json body) { return {status, std::move(body), {}}; }

ApiResponse error_reply(int status, const std::string& kind, const std::string& message,
                        const std::string& subject = {}) {
  json body = {{"error", {{"kind", kind}, {"message", message}}}};
  if (!subject.empty()) body["error"]["subject"] = subject;
  return reply(status, std::move(body));
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) fail(ErrorKind::Validation, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("request body is not JSON: ") + e.what());
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    auto j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) parts.push_back(path.substr(i, j - i));
    i = j + 1;
  }
  return parts;
}

json matrix_json(const MatrixProjection& m) {
  json surfaces = json::array();
  for (auto s : kAttackSurfaces) surfaces.push_back(to_string(s));
  json rows = json::array();
  for (const auto& row : m.grid) {
    json cells = json::array();
    for (const auto& cell : row) cells.push_back({{"intensity", cell.intensity}, {"threat_ids", cell.threat_ids}});
    rows.push_back(std::move(cells));
  }
  return {{"surfaces", surfaces}, {"categories", m.categories}, {"cells", rows}};
}

json landscape_json(const LandscapeProjection& l) {
  json surfaces = json::array();
  for (auto s : kAttackSurfaces) surfaces.push_back(to_string(s));
  json rows = json::array();
  for (const auto& row : l.grid) {
    json cells = json::array();
    for (const auto& cell : row) cells.push_back({{"height", cell.height}, {"color", cell.color}});
    rows.push_back(std::move(cells));
  }
  return {{"surfaces", surfaces}, {"cells", rows}};
}

json stride_json(const StrideDistribution& d) {
  json counts = json::object();
  int total = 0;
  for (std::size_t i = 0; i < kStrideCategories.size(); ++i) {
    counts[std::string(to_string(kStrideCategories[i]))] = d[i];
    total += d[i];
  }
  return {{"counts", counts}, {"total", total}};
}

}  // namespace

ApiService::ApiService(Pipeline& pipeline, Storage& storage, GraphStore& graph, std::string cors_origin,
                       std::optional<std::filesystem::path> config_path)
    : pipeline_(pipeline),
      storage_(storage),
      graph_(graph),
      cors_origin_(std::move(cors_origin)),
      config_path_(std::move(config_path)),
      server_(std::make_unique<Server>()) {}

ApiService::~ApiService() { stop(); }

ApiResponse ApiService::handle(const ApiRequest& request) {
  ApiResponse res;
  try {
    res = route(request);
  } catch (const Error& e) {
    res = error_reply(http_status(e.kind()), std::string(to_string(e.kind())), e.what(), e.subject());
  } catch (const json::exception& e) {
    res = error_reply(400, "parse", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", request.method, request.path, e.what());
    res = error_reply(500, "internal", e.what());
  }
  res.headers["Access-Control-Allow-Origin"] = cors_origin_;
  res.headers["Access-Control-Allow-Methods"] = "GET, POST, PUT, OPTIONS";
  res.headers["Access-Control-Allow-Headers"] = "Content-Type";
  return res;
}

ApiResponse ApiService::route(const ApiRequest& req) {
  const auto parts = split_path(req.path);
  const auto& m = req.method;
  if (m == "OPTIONS") return {204, nullptr, {}};
  if (parts.size() < 2 || parts[0] != "api") return error_reply(404, "lookup", "no such endpoint", req.path);
  const auto n = parts.size();
  const std::string& area = parts[1];
  auto not_allowed = [&] { return error_reply(405, "method", "method not allowed", req.path); };
  auto param = [&](const char* key) -> std::optional<std::string> {
    auto it = req.query.find(key);
    if (it == req.query.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };

  if (area == "runs") {
    if (n == 2) {
      if (m == "POST") {
        const auto body = parse_body(req.body);
        if (!body.contains("kind") || !body["kind"].is_string()) fail(ErrorKind::Validation, "kind is required");
        auto kind = parse_run_kind(body["kind"].get<std::string>());
        if (!kind) fail(ErrorKind::Validation, "unknown run kind", body["kind"].get<std::string>());
        auto id = pipeline_.start(*kind);
        return reply(202, {{"run_id", id}, {"status", "Running"}});
      }
      if (m == "GET") return reply(200, {{"runs", storage_.runs()}});
      return not_allowed();
    }
    if (n == 3 && m == "GET") {
      auto run = storage_.run(parts[2]);
      if (!run) fail(ErrorKind::Lookup, "unknown run", parts[2]);
      return reply(200, *run);
    }
    return not_allowed();
  }

  if (area == "intel" && n == 2) {
    if (m != "GET") return not_allowed();
    std::optional<double> min;
    if (auto v = param("min_relevance")) {
      try {
        std::size_t used = 0;
        min = std::stod(*v, &used);
        if (used != v->size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        fail(ErrorKind::Validation, "min_relevance must be a number", *v);
      }
      if (*min < 0.0 || *min > 1.0) fail(ErrorKind::Validation, "min_relevance must lie in [0, 1]", *v);
    }
    return reply(200, {{"items", storage_.items(min)}});
  }

  if (area == "threats") {
    if (m != "GET") return not_allowed();
    if (n == 2) {
      std::optional<RiskLevel> level;
      std::optional<StrideCategory> stride;
      if (auto v = param("level")) {
        level = parse_risk_level(*v);
        if (!level) fail(ErrorKind::Validation, "unknown level", *v);
      }
      if (auto v = param("stride")) {
        stride = parse_stride(*v);
        if (!stride) fail(ErrorKind::Validation, "unknown STRIDE category", *v);
      }
      json out = json::array();
      for (const auto& card : storage_.cards()) {
        if (level && card.level != *level) continue;
        if (stride && card.stride != *stride) continue;
        out.push_back(card);
      }
      return reply(200, {{"threats", out}});
    }
    if (n == 3) {
      auto card = storage_.card(parts[2]);
      if (!card) fail(ErrorKind::Lookup, "unknown threat card", parts[2]);
      return reply(200, *card);
    }
  }

  if (area == "projections" && n == 3) {
    if (m != "GET") return not_allowed();
    const auto cards = storage_.cards();
    if (parts[2] == "matrix") return reply(200, matrix_json(matrix_projection(cards, pipeline_.registry())));
    if (parts[2] == "landscape") return reply(200, landscape_json(landscape_projection(cards, pipeline_.registry())));
    if (parts[2] == "stride") return reply(200, stride_json(stride_distribution(cards)));
  }

  if (area == "graph" && n == 3) {
    if (m != "GET") return not_allowed();
    const auto snap = graph_.snapshot();
    if (parts[2] == "nodes") {
      std::optional<NodeKind> kind;
      if (auto v = param("kind")) {
        kind = parse_node_kind(*v);
        if (!kind) fail(ErrorKind::Validation, "unknown node kind", *v);
      }
      json out = json::array();
      for (auto k : kNodeKinds) {
        if (kind && k != *kind) continue;
        for (const auto* node : snap->nodes_of_kind(k)) out.push_back(*node);
      }
      return reply(200, {{"nodes", out}});
    }
    if (parts[2] == "edges") {
      std::optional<EdgeKind> kind;
      if (auto v = param("kind")) {
        kind = parse_edge_kind(*v);
        if (!kind) fail(ErrorKind::Validation, "unknown edge kind", *v);
      }
      json out = json::array();
      for (const auto& e : snap->edges) {
        if (!kind || e.kind == *kind) out.push_back(e);
      }
      return reply(200, {{"edges", out}});
    }
    if (parts[2] == "reachable") {
      auto entry = param("entry");
      if (!entry) fail(ErrorKind::Validation, "entry is required");
      return reply(200, {{"entry", *entry}, {"tools", reachable_tools(*snap, *entry)}});
    }
  }

  if (area == "plans") {
    if (n == 2 && m == "POST") {
      const auto body = parse_body(req.body);
      std::vector<std::string> ids;
      if (body.contains("card_ids")) {
        if (!body["card_ids"].is_array()) fail(ErrorKind::Validation, "card_ids must be an array");
        for (const auto& id : body["card_ids"]) {
          if (!id.is_string()) fail(ErrorKind::Validation, "card_ids must hold strings");
          ids.push_back(id.get<std::string>());
        }
      }
      return reply(201, pipeline_.plan(ids));
    }
    if (n == 3 && m == "GET") {
      auto plan = storage_.plan(parts[2]);
      if (!plan) fail(ErrorKind::Lookup, "unknown plan", parts[2]);
      return reply(200, *plan);
    }
    return not_allowed();
  }

  if (area == "config" && n == 3 && parts[2] == "scoring") {
    if (m == "GET") return reply(200, pipeline_.scoring());
    if (m == "PUT") {
      // Body is a partial patch over the current config.
      ScoringConfig next = pipeline_.scoring();
      from_json(parse_body(req.body), next);
      pipeline_.set_scoring(next);
      if (config_path_) {
        auto cfg = load_config(*config_path_);
        cfg.scoring = next;
        save_config(cfg, *config_path_);
      }
      return reply(200, pipeline_.scoring());
    }
    return not_allowed();
  }

  return error_reply(404, "lookup", "no such endpoint", req.path);
}

int ApiService::bind(const std::string& host, int port) {
  auto handler = [this](const httplib::Request& in, httplib::Response& out) {
    ApiRequest req{in.method, in.path, {}, in.body};
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);
    auto res = handle(req);
    out.status = res.status;
    for (const auto& [k, v] : res.headers) out.set_header(k, v);
    if (!res.body.is_null()) out.set_content(res.body.dump(), "application/json");
  };
  auto& http = server_->http;
  http.Get(".*", handler);
  http.Post(".*", handler);
  http.Put(".*", handler);
  http.Options(".*", handler);
  http.Delete(".*", handler);
  const int bound = port == 0 ? http.bind_to_any_port(host) : (http.bind_to_port(host, port) ? port : -1);
  if (bound > 0) spdlog::info("listening on {}:{}", host, bound);
  return bound;
}

bool ApiService::listen() { return server_->http.listen_after_bind(); }

bool ApiService::serve(const std::string& host, int port) { return bind(host, port) > 0 && listen(); }

void ApiService::stop() {
  if (server_->http.is_running()) server_->http.stop();
}

}  // namespace threathive
