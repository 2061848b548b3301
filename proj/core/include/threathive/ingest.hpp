#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "threathive/taxonomy.hpp"

namespace threathive {

class CompletionClient;
class HttpTransport;

enum class SourceType { WebSearch, Rss, Nvd, GithubAdvisory };

std::string_view to_string(SourceType t) noexcept;
std::optional<SourceType> parse_source_type(std::string_view text) noexcept;

using Timestamp = std::chrono::sys_seconds;
using Clock = std::function<Timestamp()>;

Timestamp system_now();
std::string format_timestamp(Timestamp t);               // 2025-06-01T12:00:00Z
std::optional<Timestamp> parse_timestamp(std::string_view text);

struct IntelItem {
  std::string id;
  std::string title;
  std::string content;
  std::string source_url;
  SourceType source_type = SourceType::WebSearch;
  Timestamp collected_at{};
  std::optional<double> relevance;  // assigned by threat analysis

  friend bool operator==(const IntelItem&, const IntelItem&) = default;
};

// Lowercase scheme and host, drop default ports, fragments and tracking
// parameters (utm_*, fbclid, gclid, ...).
std::string canonicalize_url(std::string_view url);

// Content address over (canonical URL, title, content).
std::string intel_item_id(std::string_view source_url, std::string_view title, std::string_view content);

IntelItem make_intel_item(std::string title, std::string content, std::string source_url, SourceType type,
                          Timestamp collected_at);

// Throws Error{Validation} if the item breaks the IntelItem schema.
void validate(const IntelItem& item, Timestamp now);

// Items sharing a canonical URL or a content hash collapse to the earliest
// collected one; the group keeps the position of its first member.
std::vector<IntelItem> dedup(const std::vector<IntelItem>& items);

enum class Specificity { Broad, Narrow };

std::string_view to_string(Specificity s) noexcept;

struct SearchQuery {
  std::string text;
  Specificity specificity = Specificity::Broad;
  std::set<std::string> seed_ids;
  int relaxation_round = 0;

  friend bool operator==(const SearchQuery&, const SearchQuery&) = default;
};

struct SourceLimits {
  std::chrono::milliseconds min_interval{0};
  std::chrono::milliseconds timeout{15000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_base{1000};
};

struct SourceConfig {
  std::vector<std::string> rss_feeds = {
      "http://export.arxiv.org/rss/cs.CR",
      "http://export.arxiv.org/rss/cs.AI",
      "https://krebsonsecurity.com/feed/",
      "https://feeds.feedburner.com/TheHackersNews",
      "https://www.schneier.com/feed/atom/",
  };
  std::string nvd_endpoint = "https://services.nvd.nist.gov/rest/json/cves/2.0";
  std::string github_advisories_endpoint = "https://api.github.com/advisories";
  std::string web_search_endpoint = "https://html.duckduckgo.com/html/";
  bool web_search_enabled = true;
  bool github_enabled = true;
  std::string github_keyword = "MCP";  // client-side filter over advisory text
  bool fetch_full_article = false;
  std::vector<std::string> nvd_keywords = {"Model Context Protocol", "MCP server"};
  std::vector<std::string> seed_queries;  // when set, used instead of generated keywords
  int nvd_window_days = 30;
  int max_pages = 5;
  SourceLimits rss_limits;
  SourceLimits nvd_limits{std::chrono::milliseconds{6000}, std::chrono::milliseconds{30000}, 3,
                          std::chrono::milliseconds{2000}};
  SourceLimits github_limits;
  SourceLimits web_limits{std::chrono::milliseconds{1000}, std::chrono::milliseconds{15000}, 2,
                          std::chrono::milliseconds{1000}};
  int min_results_threshold = 5;
  int max_relaxation_rounds = 3;
};

// Endpoints absolute, thresholds positive.
void validate(const SourceConfig& config);

struct KeywordOptions {
  std::string model_id;
  int max_output_tokens = 2048;
};

struct KeywordPlan {
  std::vector<SearchQuery> queries;
  bool degraded = false;  // template fallback used
};

// Deterministic name-based queries: one Broad query per attack surface and
// one Narrow query per taxonomy entry.
std::vector<SearchQuery> template_queries(const TaxonomyRegistry& registry);

// LLM-generated queries topped up with the template floor (every surface has
// a Broad query, every entry seeds at least one query). Falls back to the
// templates when the gateway fails or its output is unusable.
KeywordPlan generate_keywords(const TaxonomyRegistry& registry, CompletionClient& gateway,
                              const KeywordOptions& options = {});

// Drop the most specific token group (a trailing qualifier such as
// "in Claude Desktop", else the last token); Narrow becomes Broad.
// nullopt is the terminal signal: rounds exhausted or nothing left to drop.
std::optional<SearchQuery> relax_query(const SearchQuery& query, int max_relaxation_rounds);

struct CollectorError {
  SourceType source = SourceType::WebSearch;
  std::string url;
  std::string message;
};

struct CollectionResult {
  std::vector<IntelItem> items;
  std::vector<CollectorError> errors;
  std::vector<std::string> warnings;
  int retries = 0;
  std::size_t result_count = 0;  // raw hits reported by the source

  void merge(CollectionResult other);
};

struct NvdQuery {
  std::string keyword;
  Timestamp window_start{};
  Timestamp window_end{};
};

struct GithubQuery {
  std::string keyword;  // client-side filter over summary/description; empty keeps all
  int per_page = 50;
};

// Fetch + normalize for the four source types. Every collector catches its
// own failures and reports them in CollectionResult::errors.
class Collectors {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Collectors(SourceConfig config, HttpTransport& transport, Clock clock = system_now, Sleeper sleep = {});

  CollectionResult collect_rss(const std::string& feed_url);
  CollectionResult collect_nvd(const NvdQuery& query);
  CollectionResult collect_github_advisories(const GithubQuery& query);
  // Throws Error{Precondition} when web search is disabled.
  CollectionResult collect_web_search(const SearchQuery& query);
  // Runs the query and relaxes it while it returns fewer than
  // min_results_threshold hits. `attempts` receives every query tried.
  CollectionResult search_with_relaxation(const SearchQuery& query, std::vector<SearchQuery>* attempts = nullptr);

  const SourceConfig& config() const noexcept { return config_; }

 private:
  struct Fetched;
  Fetched fetch(const std::string& url, const SourceLimits& limits, std::map<std::string, std::string> headers = {});

  SourceConfig config_;
  HttpTransport& transport_;
  Clock clock_;
  Sleeper sleep_;
};

// Parsers exposed for fixtures and tests.
struct FeedEntry {
  std::string title;
  std::string summary;
  std::string link;
};
std::vector<FeedEntry> parse_feed(std::string_view xml);  // RSS 2.0, RSS 1.0 (RDF) and Atom

struct SearchHit {
  std::string title;
  std::string snippet;
  std::string url;
};
std::vector<SearchHit> parse_search_results(std::string_view html);  // DuckDuckGo HTML endpoint

std::string strip_markup(std::string_view html);

}  // namespace threathive
