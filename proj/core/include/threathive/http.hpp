#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace threathive {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lower-cased names
};

// Blocking HTTP client seam. Implementations throw Error{Network} when the
// host cannot be reached; any HTTP status, including 4xx/5xx, is returned.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;

  HttpResponse get(const std::string& url, std::map<std::string, std::string> headers = {}) {
    return send(HttpRequest{"GET", url, std::move(headers), {}});
  }
};

struct LiveTransportOptions {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{30000};
  std::string user_agent = "threathive/0.1";
};

// cpp-httplib backed transport for http:// and https:// URLs.
class LiveHttpTransport final : public HttpTransport {
 public:
  explicit LiveHttpTransport(LiveTransportOptions options = {});
  HttpResponse send(const HttpRequest& request) override;

 private:
  LiveTransportOptions options_;
};

// Serves canned responses keyed by URL prefix (longest match wins). URLs
// with no route behave like an unreachable host. Every request is logged.
class FixtureTransport final : public HttpTransport {
 public:
  struct Route {
    std::string url_prefix;
    HttpResponse response;
    bool unreachable = false;
  };

  FixtureTransport() = default;
  FixtureTransport(FixtureTransport&& other) noexcept;

  // routes.json: [{"url_prefix": ..., "status": 200, "file": "relative/path",
  //                "body": "...", "headers": {...}, "unreachable": false}]
  static FixtureTransport from_routes_file(const std::filesystem::path& routes_json);

  void add(std::string url_prefix, HttpResponse response);
  void add_unreachable(std::string url_prefix);

  HttpResponse send(const HttpRequest& request) override;

  std::vector<HttpRequest> requests() const;
  std::size_t request_count() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Route> routes_;
  std::vector<HttpRequest> log_;
};

// Percent-encodes a query-string component.
std::string url_encode(std::string_view text);
std::string url_decode(std::string_view text);

}  // namespace threathive
