#include "threathive/ingest.hpp"

#include <algorithm>
#include <ctime>
#include <map>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hashing.hpp"
#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"
#include "threathive/prompts.hpp"
#include "threathive/repair.hpp"

namespace threathive {

using nlohmann::json;

std::string_view to_string(SourceType t) noexcept {
  switch (t) {
    case SourceType::WebSearch: return "WebSearch";
    case SourceType::Rss: return "Rss";
    case SourceType::Nvd: return "Nvd";
    case SourceType::GithubAdvisory: return "GithubAdvisory";
  }
  return "?";
}

std::optional<SourceType> parse_source_type(std::string_view text) noexcept {
  for (auto t : {SourceType::WebSearch, SourceType::Rss, SourceType::Nvd, SourceType::GithubAdvisory}) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

std::string_view to_string(Specificity s) noexcept { return s == Specificity::Broad ? "Broad" : "Narrow"; }

Timestamp system_now() { return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()); }

std::string format_timestamp(Timestamp t) {
  const std::time_t tt = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  std::tm tm{};
  const std::string s(text);
  const char* end = strptime(s.c_str(), "%Y-%m-%dT%H:%M:%S", &tm);
  if (end == nullptr) {
    end = strptime(s.c_str(), "%Y-%m-%d", &tm);
    if (end == nullptr) return std::nullopt;
  }
  return Timestamp{std::chrono::seconds{timegm(&tm)}};
}

namespace {

bool is_tracking_param(std::string_view key) {
  static const std::set<std::string, std::less<>> exact = {"fbclid", "gclid",   "dclid",  "msclkid", "mc_cid",
                                                           "mc_eid", "ref_src", "igshid", "yclid",   "_hsenc",
                                                           "_hsmi"};
  const std::string k = detail::to_lower(key);
  return k.rfind("utm_", 0) == 0 || exact.count(k) > 0;
}

}  // namespace

std::string canonicalize_url(std::string_view url_in) {
  std::string url(detail::trim(url_in));
  if (auto hash = url.find('#'); hash != std::string::npos) url.erase(hash);

  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) return url;
  std::string scheme = detail::to_lower(url.substr(0, scheme_end));
  std::string rest = url.substr(scheme_end + 3);

  const auto path_pos = rest.find_first_of("/?");
  std::string authority = path_pos == std::string::npos ? rest : rest.substr(0, path_pos);
  std::string tail = path_pos == std::string::npos ? "" : rest.substr(path_pos);
  authority = detail::to_lower(authority);
  if ((scheme == "http" && authority.size() > 3 && authority.ends_with(":80")) ||
      (scheme == "https" && authority.size() > 4 && authority.ends_with(":443"))) {
    authority.erase(authority.rfind(':'));
  }

  std::string path = tail, query;
  if (auto q = tail.find('?'); q != std::string::npos) {
    path = tail.substr(0, q);
    query = tail.substr(q + 1);
  }
  if (path.empty()) path = "/";

  std::vector<std::string> kept;
  std::size_t start = 0;
  while (start <= query.size() && !query.empty()) {
    const auto amp = query.find('&', start);
    std::string param = query.substr(start, amp == std::string::npos ? std::string::npos : amp - start);
    if (!param.empty()) {
      const std::string key = param.substr(0, param.find('='));
      if (!is_tracking_param(key)) kept.push_back(param);
    }
    if (amp == std::string::npos) break;
    start = amp + 1;
  }

  std::string out = scheme + "://" + authority + path;
  if (!kept.empty()) out += "?" + detail::join(kept, "&");
  return out;
}

std::string intel_item_id(std::string_view source_url, std::string_view title, std::string_view content) {
  const std::string canon = canonicalize_url(source_url);
  return "intel-" + detail::fields_digest({canon, title, content}).substr(0, 20);
}

IntelItem make_intel_item(std::string title, std::string content, std::string source_url, SourceType type,
                          Timestamp collected_at) {
  IntelItem item;
  item.id = intel_item_id(source_url, title, content);
  item.title = std::move(title);
  item.content = std::move(content);
  item.source_url = std::move(source_url);
  item.source_type = type;
  item.collected_at = collected_at;
  return item;
}

void validate(const IntelItem& item, Timestamp now) {
  if (item.id != intel_item_id(item.source_url, item.title, item.content)) {
    fail(ErrorKind::Validation, "id is not the content address of (url, title, content)", item.id);
  }
  if (item.source_url.find("://") == std::string::npos) {
    fail(ErrorKind::Validation, "source_url must be absolute", item.id);
  }
  if (item.collected_at > now) fail(ErrorKind::Validation, "collected_at lies in the future", item.id);
  if (item.relevance && !(*item.relevance >= 0.0 && *item.relevance <= 1.0)) {
    fail(ErrorKind::Validation, "relevance must lie in [0, 1]", item.id);
  }
}

std::vector<IntelItem> dedup(const std::vector<IntelItem>& items) {
  const std::size_t n = items.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  std::unordered_map<std::string, std::size_t> by_url, by_content;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string url = canonicalize_url(items[i].source_url);
    const std::string content = detail::sha256_hex(items[i].content);
    if (auto [it, fresh] = by_url.emplace(url, i); !fresh) unite(i, it->second);
    if (auto [it, fresh] = by_content.emplace(content, i); !fresh) unite(i, it->second);
  }

  std::map<std::size_t, std::size_t> best;  // group root (= first member) -> chosen index
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    auto [it, fresh] = best.emplace(root, i);
    if (!fresh && items[i].collected_at < items[it->second].collected_at) it->second = i;
  }
  std::vector<IntelItem> out;
  out.reserve(best.size());
  for (const auto& [root, chosen] : best) out.push_back(items[chosen]);
  return out;
}

namespace {

std::string_view surface_phrase(AttackSurface s) {
  switch (s) {
    case AttackSurface::ServerApis: return "server API authentication vulnerabilities";
    case AttackSurface::ToolMetadata: return "tool metadata poisoning";
    case AttackSurface::RuntimeFlow: return "prompt injection runtime";
    case AttackSurface::Transport: return "transport layer attacks";
  }
  return "vulnerabilities";
}

void add_unique(std::vector<SearchQuery>& out, SearchQuery q) {
  const std::string key = detail::to_lower(detail::trim(q.text));
  for (auto& existing : out) {
    if (detail::to_lower(detail::trim(existing.text)) == key) {
      existing.seed_ids.insert(q.seed_ids.begin(), q.seed_ids.end());
      return;
    }
  }
  out.push_back(std::move(q));
}

void top_up(std::vector<SearchQuery>& queries, const TaxonomyRegistry& registry) {
  if (registry.empty()) return;
  const auto templates = template_queries(registry);
  for (auto surface : kAttackSurfaces) {
    std::set<std::string> ids;
    for (const auto& [id, p] : registry.entries()) {
      if (p.attack_surface == surface) ids.insert(id);
    }
    if (ids.empty()) continue;
    const bool covered = std::any_of(queries.begin(), queries.end(), [&](const SearchQuery& q) {
      return q.specificity == Specificity::Broad &&
             std::any_of(q.seed_ids.begin(), q.seed_ids.end(), [&](const std::string& id) { return ids.count(id); });
    });
    if (!covered) {
      for (const auto& t : templates) {
        if (t.specificity == Specificity::Broad && t.seed_ids == ids) add_unique(queries, t);
      }
    }
  }
  for (const auto& [id, p] : registry.entries()) {
    const bool seeded = std::any_of(queries.begin(), queries.end(),
                                    [&](const SearchQuery& q) { return q.seed_ids.count(id) > 0; });
    if (!seeded) {
      for (const auto& t : templates) {
        if (t.specificity == Specificity::Narrow && t.seed_ids.count(id)) add_unique(queries, t);
      }
    }
  }
}

}  // namespace

std::vector<SearchQuery> template_queries(const TaxonomyRegistry& registry) {
  std::vector<SearchQuery> out;
  if (registry.empty()) return out;
  for (auto surface : kAttackSurfaces) {
    SearchQuery q;
    q.specificity = Specificity::Broad;
    q.text = "MCP security " + std::string(surface_phrase(surface));
    for (const auto& [id, p] : registry.entries()) {
      if (p.attack_surface == surface) q.seed_ids.insert(id);
    }
    if (!q.seed_ids.empty()) out.push_back(std::move(q));
  }
  for (const auto& [id, p] : registry.entries()) {
    SearchQuery q;
    q.specificity = Specificity::Narrow;
    q.text = "MCP " + p.name;
    q.seed_ids = {id};
    out.push_back(std::move(q));
  }
  return out;
}

KeywordPlan generate_keywords(const TaxonomyRegistry& registry, CompletionClient& gateway,
                              const KeywordOptions& options) {
  KeywordPlan plan;
  if (registry.empty()) return plan;

  std::string listing;
  for (const auto& [id, p] : registry.entries()) {
    listing += id + " | " + p.name + " | " + std::string(to_string(p.attack_surface)) + "\n";
  }
  CompletionRequest req;
  req.system_prompt = std::string(prompts::keyword_generation());
  req.user_prompt = "MCP-38 taxonomy entries (id | name | attack surface):\n" + listing;
  req.model_id = options.model_id;
  req.max_output_tokens = options.max_output_tokens;

  try {
    const std::string raw = gateway.complete(req);
    const RecordSchema schema{{{"text", true}, {"specificity", true}, {"seed_ids", false}}};
    for (const auto& rec : repair_output(raw, schema).records) {
      if (!rec.is_object() || !rec.contains("text") || !rec.contains("specificity") || !rec["text"].is_string() ||
          !rec["specificity"].is_string()) {
        continue;
      }
      SearchQuery q;
      q.text = std::string(detail::trim(rec.at("text").get<std::string>()));
      const std::string spec = detail::fold_identifier(rec.at("specificity").get<std::string>());
      if (q.text.empty() || (spec != "broad" && spec != "narrow")) continue;
      q.specificity = spec == "broad" ? Specificity::Broad : Specificity::Narrow;
      if (auto it = rec.find("seed_ids"); it != rec.end() && it->is_array()) {
        for (const auto& id : *it) {
          if (id.is_string() && registry.contains(id.get<std::string>())) q.seed_ids.insert(id.get<std::string>());
        }
      }
      add_unique(plan.queries, std::move(q));
    }
  } catch (const Error& e) {
    spdlog::warn("keyword generation failed, using template queries: {}", e.what());
    plan.queries.clear();
  }

  if (plan.queries.empty()) {
    plan.degraded = true;
    plan.queries = template_queries(registry);
    return plan;
  }
  top_up(plan.queries, registry);
  return plan;
}

std::optional<SearchQuery> relax_query(const SearchQuery& query, int max_relaxation_rounds) {
  if (query.relaxation_round >= max_relaxation_rounds) {
    spdlog::info("query abandoned after {} relaxation rounds: \"{}\"", query.relaxation_round, query.text);
    return std::nullopt;
  }
  auto tokens = detail::split_whitespace(query.text);
  if (tokens.size() <= 1) {
    spdlog::info("query cannot be relaxed further: \"{}\"", query.text);
    return std::nullopt;
  }
  static const std::set<std::string> qualifiers = {"in",    "on",   "for",     "via",    "with",
                                                   "using", "from", "against", "within", "through"};
  std::size_t cut = tokens.size() - 1;
  for (std::size_t i = tokens.size() - 1; i >= 1; --i) {
    if (qualifiers.count(detail::to_lower(tokens[i]))) {
      cut = i;
      break;
    }
  }
  tokens.resize(cut);
  SearchQuery out = query;
  out.text = detail::join(tokens, " ");
  out.specificity = Specificity::Broad;
  out.relaxation_round = query.relaxation_round + 1;
  return out;
}

void CollectionResult::merge(CollectionResult other) {
  items.insert(items.end(), std::make_move_iterator(other.items.begin()), std::make_move_iterator(other.items.end()));
  errors.insert(errors.end(), other.errors.begin(), other.errors.end());
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
  retries += other.retries;
  result_count += other.result_count;
}

void validate(const SourceConfig& c) {
  auto absolute = [](const std::string& url, const char* what) {
    if (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0) {
      fail(ErrorKind::Config, std::string(what) + " must be an absolute http(s) URL", url);
    }
  };
  for (const auto& f : c.rss_feeds) absolute(f, "rss feed");
  absolute(c.nvd_endpoint, "nvd_endpoint");
  absolute(c.github_advisories_endpoint, "github_advisories_endpoint");
  absolute(c.web_search_endpoint, "web_search_endpoint");
  if (c.min_results_threshold <= 0) fail(ErrorKind::Config, "min_results_threshold must be positive", "sources");
  if (c.max_relaxation_rounds < 0) fail(ErrorKind::Config, "max_relaxation_rounds must be >= 0", "sources");
  if (c.max_pages <= 0) fail(ErrorKind::Config, "max_pages must be positive", "sources");
  if (c.nvd_window_days <= 0) fail(ErrorKind::Config, "nvd_window_days must be positive", "sources");
}

}  // namespace threathive
