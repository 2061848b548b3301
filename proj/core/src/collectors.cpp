#include <cctype>
#include <set>
#include <regex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/http.hpp"
#include "threathive/ingest.hpp"

namespace threathive {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxArticleChars = 20000;

bool retryable_status(int status) { return status == 403 || status == 429 || status >= 500; }

std::string nvd_time(Timestamp t) {
  // NVD wants an ISO-8601 timestamp with milliseconds and no zone suffix.
  std::string s = format_timestamp(t);
  s.pop_back();
  return s + ".000";
}

std::string append_query(const std::string& url, const std::string& params) {
  return url + (url.find('?') == std::string::npos ? "?" : "&") + params;
}

// rel="next" target of an RFC 8288 Link header.
std::optional<std::string> next_link(const std::string& header) {
  static const std::regex re(R"re(<([^>]+)>\s*;\s*rel="?next"?)re");
  std::smatch m;
  if (std::regex_search(header, m, re)) return m[1].str();
  return std::nullopt;
}

std::string child_text(const pt::ptree& node, const std::string& key) {
  if (auto c = node.get_child_optional(key)) return c->get_value<std::string>();
  return {};
}

std::string atom_link(const pt::ptree& entry) {
  std::string fallback;
  for (const auto& [name, child] : entry) {
    if (name != "link") continue;
    const std::string href = child.get<std::string>("<xmlattr>.href", child.get_value<std::string>());
    const std::string rel = child.get<std::string>("<xmlattr>.rel", "alternate");
    if (rel == "alternate" && !href.empty()) return href;
    if (fallback.empty()) fallback = href;
  }
  return fallback;
}

std::string decode_entities(std::string_view s) {
  static const std::vector<std::pair<std::string_view, std::string_view>> named = {
      {"&amp;", "&"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&nbsp;", " "}};
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    bool done = false;
    for (const auto& [from, to] : named) {
      if (s.substr(i, from.size()) == from) {
        out += to;
        i += from.size();
        done = true;
        break;
      }
    }
    if (done) continue;
    if (s.substr(i, 2) == "&#") {
      const auto semi = s.find(';', i);
      if (semi != std::string_view::npos && semi - i <= 8) {
        const bool hex = s[i + 2] == 'x' || s[i + 2] == 'X';
        const std::string digits(s.substr(i + (hex ? 3 : 2), semi - i - (hex ? 3 : 2)));
        try {
          const unsigned long cp = std::stoul(digits, nullptr, hex ? 16 : 10);
          if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
          } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
          } else {
            out.push_back(static_cast<char>(0xE0 | ((cp >> 12) & 0x0F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
          }
          i = semi + 1;
          continue;
        } catch (const std::exception&) {
        }
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) { return detail::join(detail::split_whitespace(s), " "); }

std::string result_href(std::string href) {
  href = decode_entities(href);
  if (auto pos = href.find("uddg="); pos != std::string::npos) {
    auto value = href.substr(pos + 5);
    if (auto amp = value.find('&'); amp != std::string::npos) value.erase(amp);
    return url_decode(value);
  }
  if (href.rfind("//", 0) == 0) return "https:" + href;
  return href;
}

}  // namespace

std::string strip_markup(std::string_view html) {
  std::string text;
  text.reserve(html.size());
  bool in_tag = false;
  for (std::size_t i = 0; i < html.size(); ++i) {
    const char c = html[i];
    if (!in_tag && c == '<') {
      // Drop script/style bodies entirely.
      for (std::string_view tag : {"script", "style"}) {
        if (detail::to_lower(html.substr(i + 1, tag.size())) == tag) {
          const auto close = detail::to_lower(html).find("</" + std::string(tag), i);
          if (close != std::string::npos) i = close;
          break;
        }
      }
      in_tag = true;
      // inline formatting tags do not break words
      std::size_t n = i + 1;
      if (n < html.size() && html[n] == '/') ++n;
      std::size_t e = n;
      while (e < html.size() && std::isalpha(static_cast<unsigned char>(html[e]))) ++e;
      static const std::set<std::string> inline_tags = {"a", "b", "i", "em", "strong", "span", "code", "u", "small", "mark"};
      if (!inline_tags.count(detail::to_lower(html.substr(n, e - n)))) text.push_back(' ');
    } else if (in_tag && c == '>') {
      in_tag = false;
    } else if (!in_tag) {
      text.push_back(c);
    }
  }
  return collapse_whitespace(decode_entities(text));
}

std::vector<FeedEntry> parse_feed(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    fail(ErrorKind::Parse, std::string("malformed feed: ") + e.what());
  }

  std::vector<FeedEntry> out;
  auto rss_item = [&out](const pt::ptree& item) {
    FeedEntry e;
    e.title = strip_markup(child_text(item, "title"));
    e.summary = strip_markup(child_text(item, "description"));
    if (e.summary.empty()) e.summary = strip_markup(child_text(item, "content:encoded"));
    e.link = std::string(detail::trim(child_text(item, "link")));
    out.push_back(std::move(e));
  };

  if (auto rss = tree.get_child_optional("rss")) {
    if (auto channel = rss->get_child_optional("channel")) {
      for (const auto& [name, child] : *channel) {
        if (name == "item") rss_item(child);
      }
    }
    return out;
  }
  if (auto rdf = tree.get_child_optional("rdf:RDF")) {
    for (const auto& [name, child] : *rdf) {
      if (name == "item") rss_item(child);
    }
    return out;
  }
  if (auto feed = tree.get_child_optional("feed")) {
    for (const auto& [name, entry] : *feed) {
      if (name != "entry") continue;
      FeedEntry e;
      e.title = strip_markup(child_text(entry, "title"));
      e.summary = strip_markup(child_text(entry, "summary"));
      if (e.summary.empty()) e.summary = strip_markup(child_text(entry, "content"));
      e.link = atom_link(entry);
      out.push_back(std::move(e));
    }
    return out;
  }
  fail(ErrorKind::Parse, "document is neither RSS nor Atom");
}

std::vector<SearchHit> parse_search_results(std::string_view html_view) {
  static const std::regex anchor(R"re(<a\b([^>]*\bclass="[^"]*\bresult__a\b[^"]*"[^>]*)>([\s\S]*?)</a>)re");
  static const std::regex snippet(R"re(<([a-z]+)\b[^>]*\bclass="[^"]*\bresult__snippet\b[^"]*"[^>]*>([\s\S]*?)</\1>)re");
  static const std::regex href(R"re(\bhref="([^"]*)")re");

  const std::string html(html_view);
  std::vector<std::pair<std::size_t, SearchHit>> hits;
  for (auto it = std::sregex_iterator(html.begin(), html.end(), anchor); it != std::sregex_iterator(); ++it) {
    const std::string attrs = (*it)[1].str();
    std::smatch h;
    if (!std::regex_search(attrs, h, href)) continue;
    const std::string url = result_href(h[1].str());
    if (url.find("duckduckgo.com/y.js") != std::string::npos) continue;  // sponsored
    SearchHit hit;
    hit.url = url;
    hit.title = strip_markup((*it)[2].str());
    hits.emplace_back(static_cast<std::size_t>(it->position() + it->length()), std::move(hit));
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const auto begin = html.begin() + static_cast<std::ptrdiff_t>(hits[i].first);
    const auto end = i + 1 < hits.size() ? html.begin() + static_cast<std::ptrdiff_t>(hits[i + 1].first) : html.end();
    std::smatch m;
    if (std::regex_search(begin, end, m, snippet)) hits[i].second.snippet = strip_markup(m[2].str());
  }
  std::vector<SearchHit> out;
  for (auto& [pos, hit] : hits) {
    if (!hit.url.empty()) out.push_back(std::move(hit));
  }
  return out;
}

struct Collectors::Fetched {
  HttpResponse response;
  int retries = 0;
  bool ok = false;
  bool rate_limited = false;
  std::string error;
};

Collectors::Collectors(SourceConfig config, HttpTransport& transport, Clock clock, Sleeper sleep)
    : config_(std::move(config)), transport_(transport), clock_(std::move(clock)), sleep_(std::move(sleep)) {
  validate(config_);
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Collectors::Fetched Collectors::fetch(const std::string& url, const SourceLimits& limits,
                                      std::map<std::string, std::string> headers) {
  Fetched f;
  for (int attempt = 0;; ++attempt) {
    bool retry = false;
    try {
      f.response = transport_.send(HttpRequest{"GET", url, headers, {}});
      f.rate_limited = f.response.status == 403 || f.response.status == 429;
      if (f.response.status >= 200 && f.response.status < 300) {
        f.ok = true;
        return f;
      }
      f.error = "HTTP " + std::to_string(f.response.status);
      retry = retryable_status(f.response.status);
    } catch (const Error& e) {
      f.error = e.what();
      retry = e.kind() == ErrorKind::Network;
    }
    if (!retry || attempt >= limits.max_retries) return f;
    const auto delay = limits.backoff_base * (1LL << attempt);
    spdlog::debug("retrying {} in {} ms ({})", url, delay.count(), f.error);
    sleep_(delay);
    ++f.retries;
  }
}

CollectionResult Collectors::collect_rss(const std::string& feed_url) {
  CollectionResult result;
  auto f = fetch(feed_url, config_.rss_limits);
  result.retries = f.retries;
  if (!f.ok) {
    result.errors.push_back({SourceType::Rss, feed_url, f.error});
    return result;
  }
  std::vector<FeedEntry> entries;
  try {
    entries = parse_feed(f.response.body);
  } catch (const Error& e) {
    result.errors.push_back({SourceType::Rss, feed_url, e.what()});
    return result;
  }
  result.result_count = entries.size();
  const auto now = clock_();
  for (auto& e : entries) {
    if (e.link.empty() || (e.title.empty() && e.summary.empty())) {
      result.warnings.push_back("feed entry without link or text skipped: " + feed_url);
      continue;
    }
    std::string content = e.summary.empty() ? e.title : e.summary;
    result.items.push_back(make_intel_item(e.title, std::move(content), e.link, SourceType::Rss, now));
  }
  return result;
}

CollectionResult Collectors::collect_nvd(const NvdQuery& query) {
  CollectionResult result;
  constexpr int kPageSize = 100;
  int start = 0;
  for (int page = 0; page < config_.max_pages; ++page) {
    if (page > 0) sleep_(config_.nvd_limits.min_interval);
    std::string params = "keywordSearch=" + url_encode(query.keyword) + "&resultsPerPage=" + std::to_string(kPageSize) +
                         "&startIndex=" + std::to_string(start);
    if (query.window_end > query.window_start) {
      params += "&pubStartDate=" + url_encode(nvd_time(query.window_start)) +
                "&pubEndDate=" + url_encode(nvd_time(query.window_end));
    }
    const std::string url = append_query(config_.nvd_endpoint, params);
    auto f = fetch(url, config_.nvd_limits);
    result.retries += f.retries;
    if (!f.ok) {
      if (f.rate_limited) {
        result.warnings.push_back("NVD rate limit persisted after " + std::to_string(f.retries) +
                                  " retries; returning " + std::to_string(result.items.size()) + " partial results");
        if (result.items.empty()) result.errors.push_back({SourceType::Nvd, url, f.error});
      } else {
        result.errors.push_back({SourceType::Nvd, url, f.error});
      }
      return result;
    }
    json body;
    try {
      body = json::parse(f.response.body);
    } catch (const json::exception& e) {
      result.errors.push_back({SourceType::Nvd, url, std::string("malformed NVD response: ") + e.what()});
      return result;
    }
    const auto vulns = body.value("vulnerabilities", json::array());
    const auto total = body.value("totalResults", static_cast<int>(vulns.size()));
    result.result_count = static_cast<std::size_t>(std::max(total, 0));
    const auto now = clock_();
    for (const auto& v : vulns) {
      const auto cve = v.value("cve", json::object());
      const std::string id = cve.value("id", "");
      if (id.empty()) {
        result.warnings.push_back("NVD record without id skipped");
        continue;
      }
      std::string description;
      for (const auto& d : cve.value("descriptions", json::array())) {
        if (d.value("lang", "") == "en") {
          description = d.value("value", "");
          break;
        }
      }
      if (description.empty()) description = id;
      result.items.push_back(make_intel_item(id, id + ": " + description, "https://nvd.nist.gov/vuln/detail/" + id,
                                             SourceType::Nvd, now));
    }
    start += static_cast<int>(vulns.size());
    if (vulns.empty() || start >= total) break;
  }
  return result;
}

CollectionResult Collectors::collect_github_advisories(const GithubQuery& query) {
  CollectionResult result;
  std::string url = append_query(config_.github_advisories_endpoint, "per_page=" + std::to_string(query.per_page));
  const std::map<std::string, std::string> headers = {{"Accept", "application/vnd.github+json"},
                                                      {"X-GitHub-Api-Version", "2022-11-28"}};
  for (int page = 0; page < config_.max_pages && !url.empty(); ++page) {
    if (page > 0) sleep_(config_.github_limits.min_interval);
    auto f = fetch(url, config_.github_limits, headers);
    result.retries += f.retries;
    if (!f.ok) {
      if (f.rate_limited && !result.items.empty()) {
        result.warnings.push_back("GitHub rate limit hit; returning partial results");
      } else {
        result.errors.push_back({SourceType::GithubAdvisory, url, f.error});
      }
      return result;
    }
    json body;
    try {
      body = json::parse(f.response.body);
    } catch (const json::exception& e) {
      result.errors.push_back({SourceType::GithubAdvisory, url, std::string("malformed response: ") + e.what()});
      return result;
    }
    if (!body.is_array()) {
      result.errors.push_back({SourceType::GithubAdvisory, url, "expected an array of advisories"});
      return result;
    }
    const auto now = clock_();
    for (const auto& adv : body) {
      ++result.result_count;
      if (!adv.is_object() || !adv.contains("ghsa_id") || !adv["ghsa_id"].is_string() || !adv.contains("summary") ||
          !adv["summary"].is_string() || !adv.contains("html_url") || !adv["html_url"].is_string()) {
        result.warnings.push_back("malformed advisory record skipped");
        continue;
      }
      const std::string ghsa = adv["ghsa_id"];
      const std::string summary = adv["summary"];
      std::string description = adv.contains("description") && adv["description"].is_string()
                                    ? adv["description"].get<std::string>()
                                    : summary;
      if (!query.keyword.empty() && !detail::icontains(summary, query.keyword) &&
          !detail::icontains(description, query.keyword)) {
        continue;
      }
      if (adv.contains("cve_id") && adv["cve_id"].is_string()) {
        description += "\n" + adv["cve_id"].get<std::string>();
      }
      result.items.push_back(make_intel_item(ghsa + ": " + summary, std::move(description),
                                             adv["html_url"].get<std::string>(), SourceType::GithubAdvisory, now));
    }
    auto link = f.response.headers.find("link");
    url = link == f.response.headers.end() ? std::string{} : next_link(link->second).value_or("");
  }
  return result;
}

CollectionResult Collectors::collect_web_search(const SearchQuery& query) {
  if (!config_.web_search_enabled) fail(ErrorKind::Precondition, "web search is disabled", query.text);
  CollectionResult result;
  const std::string url = append_query(config_.web_search_endpoint, "q=" + url_encode(query.text));
  auto f = fetch(url, config_.web_limits);
  result.retries = f.retries;
  if (!f.ok) {
    result.errors.push_back({SourceType::WebSearch, url, f.error});
    return result;
  }
  const auto hits = parse_search_results(f.response.body);
  result.result_count = hits.size();
  const auto now = clock_();
  for (const auto& hit : hits) {
    std::string content = hit.snippet.empty() ? hit.title : hit.snippet;
    if (config_.fetch_full_article) {
      sleep_(config_.web_limits.min_interval);
      auto article = fetch(hit.url, config_.web_limits);
      result.retries += article.retries;
      if (article.ok) {
        content = strip_markup(article.response.body);
        if (content.size() > kMaxArticleChars) content.resize(kMaxArticleChars);
      } else {
        result.warnings.push_back("article fetch failed, keeping snippet: " + hit.url);
      }
    }
    result.items.push_back(make_intel_item(hit.title, std::move(content), hit.url, SourceType::WebSearch, now));
  }
  return result;
}

CollectionResult Collectors::search_with_relaxation(const SearchQuery& query, std::vector<SearchQuery>* attempts) {
  CollectionResult total;
  std::optional<SearchQuery> current = query;
  bool first = true;
  while (current) {
    if (!first) sleep_(config_.web_limits.min_interval);
    first = false;
    if (attempts) attempts->push_back(*current);
    auto r = collect_web_search(*current);
    const bool enough = r.errors.empty() && r.result_count >= static_cast<std::size_t>(config_.min_results_threshold);
    const bool failed = !r.errors.empty();
    total.merge(std::move(r));
    if (enough || failed) break;
    current = relax_query(*current, config_.max_relaxation_rounds);
  }
  return total;
}

}  // namespace threathive
