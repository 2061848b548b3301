#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "threathive/error.hpp"
#include "threathive/graph.hpp"
#include "threathive/pipeline.hpp"
#include "threathive/storage.hpp"

namespace threathive {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;  // null for bodiless replies (204)
  std::map<std::string, std::string> headers;
};

// REST surface over the pipeline, storage and graph. handle() is
// transport-free so the routes can be exercised without sockets.
class ApiService {
 public:
  ApiService(Pipeline& pipeline, Storage& storage, GraphStore& graph, std::string cors_origin = "*",
             std::optional<std::filesystem::path> config_path = std::nullopt);
  ~ApiService();

  ApiResponse handle(const ApiRequest& request);

  // Blocks until stop() is called or the socket cannot be bound (returns false).
  bool serve(const std::string& host, int port);
  // Split form of serve(): port 0 picks a free port. bind() returns the bound
  // port or -1; listen() blocks like serve().
  int bind(const std::string& host, int port);
  bool listen();
  void stop();

 private:
  ApiResponse route(const ApiRequest& request);

  Pipeline& pipeline_;
  Storage& storage_;
  GraphStore& graph_;
  std::string cors_origin_;
  std::optional<std::filesystem::path> config_path_;
  struct Server;
  std::unique_ptr<Server> server_;
};

// Error kind -> HTTP status (Validation/Parse 400, Lookup 404, Conflict 409,
// Precondition 422, everything else 500).
int http_status(ErrorKind kind) noexcept;

}  // namespace threathive
