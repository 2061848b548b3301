#include "threathive/http.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "threathive/error.hpp"

namespace threathive {

namespace {

struct UrlParts {
  std::string scheme_host_port;  // "https://host:port"
  std::string path_and_query;
};

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorKind::Config, "URL must be absolute", url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

LiveHttpTransport::LiveHttpTransport(LiveTransportOptions options) : options_(std::move(options)) {}

HttpResponse LiveHttpTransport::send(const HttpRequest& request) {
  const UrlParts parts = split_url(request.url);
  httplib::Client client(parts.scheme_host_port);
  client.set_connection_timeout(options_.connect_timeout);
  client.set_read_timeout(options_.read_timeout);
  client.set_follow_location(true);

  httplib::Headers headers{{"User-Agent", options_.user_agent}};
  std::string content_type = "application/json";
  for (const auto& [k, v] : request.headers) {
    if (detail::to_lower(k) == "content-type") {
      content_type = v;
    } else {
      headers.emplace(k, v);
    }
  }

  httplib::Result result = request.method == "POST"
                               ? client.Post(parts.path_and_query, headers, request.body, content_type)
                               : client.Get(parts.path_and_query, headers);
  if (!result) {
    fail(ErrorKind::Network, "request failed: " + httplib::to_string(result.error()), request.url);
  }
  HttpResponse out;
  out.status = result->status;
  out.body = result->body;
  for (const auto& [k, v] : result->headers) out.headers[detail::to_lower(k)] = v;
  return out;
}

FixtureTransport::FixtureTransport(FixtureTransport&& other) noexcept {
  std::lock_guard lock(other.mutex_);
  routes_ = std::move(other.routes_);
  log_ = std::move(other.log_);
}

FixtureTransport FixtureTransport::from_routes_file(const std::filesystem::path& routes_json) {
  std::ifstream in(routes_json);
  if (!in) fail(ErrorKind::Config, "cannot open fixture routes", routes_json.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, e.what(), routes_json.string());
  }
  FixtureTransport t;
  const auto base = routes_json.parent_path();
  for (const auto& r : doc) {
    const std::string prefix = r.at("url_prefix").get<std::string>();
    if (r.value("unreachable", false)) {
      t.add_unreachable(prefix);
      continue;
    }
    HttpResponse resp;
    resp.status = r.value("status", 200);
    if (r.contains("file")) {
      std::ifstream f(base / r.at("file").get<std::string>(), std::ios::binary);
      if (!f) fail(ErrorKind::Config, "missing fixture body", r.at("file").get<std::string>());
      std::ostringstream buf;
      buf << f.rdbuf();
      resp.body = buf.str();
    } else {
      resp.body = r.value("body", std::string{});
    }
    if (r.contains("headers")) {
      for (const auto& [k, v] : r.at("headers").items()) resp.headers[detail::to_lower(k)] = v.get<std::string>();
    }
    t.add(prefix, std::move(resp));
  }
  return t;
}

void FixtureTransport::add(std::string url_prefix, HttpResponse response) {
  std::lock_guard lock(mutex_);
  routes_.push_back(Route{std::move(url_prefix), std::move(response), false});
}

void FixtureTransport::add_unreachable(std::string url_prefix) {
  std::lock_guard lock(mutex_);
  routes_.push_back(Route{std::move(url_prefix), {}, true});
}

HttpResponse FixtureTransport::send(const HttpRequest& request) {
  std::lock_guard lock(mutex_);
  log_.push_back(request);
  const Route* best = nullptr;
  for (const auto& r : routes_) {
    if (request.url.rfind(r.url_prefix, 0) == 0 && (!best || r.url_prefix.size() > best->url_prefix.size())) {
      best = &r;
    }
  }
  if (!best || best->unreachable) fail(ErrorKind::Network, "host unreachable (fixture)", request.url);
  return best->response;
}

std::vector<HttpRequest> FixtureTransport::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t FixtureTransport::request_count() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::string url_encode(std::string_view text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0x0f]);
    }
  }
  return out;
}

std::string url_decode(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '+') {
      out.push_back(' ');
    } else if (text[i] == '%' && i + 2 < text.size() && std::isxdigit(static_cast<unsigned char>(text[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(text[i + 2]))) {
      out.push_back(static_cast<char>(std::stoi(std::string(text.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(text[i]);
    }
  }
  return out;
}

}  // namespace threathive
