#include "threathive/config.hpp"

#include <fstream>
#include <set>

#include "threathive/error.hpp"
#include "threathive/serialization.hpp"

namespace threathive {

using nlohmann::json;

KeywordOptions PlatformConfig::keyword_options() const { return {models.for_keywords(), 2048}; }

AnalysisConfig PlatformConfig::analysis_config() const {
  auto a = analysis;
  a.model_id = models.for_classification();
  return a;
}

PlannerConfig PlatformConfig::planner_config() const {
  auto p = planner;
  p.model_id = models.for_planning();
  return p;
}

ResolutionConfig PlatformConfig::resolution_config() const {
  ResolutionConfig r;
  r.model_id = models.for_extraction();
  return r;
}

ExtractionConfig PlatformConfig::extraction_config() const {
  auto e = graph.extraction;
  e.model_id = models.for_extraction();
  return e;
}

void validate(const PlatformConfig& c) {
  validate(c.sources);
  try {
    validate(c.scoring);
  } catch (const Error& e) {
    fail(ErrorKind::Config, e.what(), "scoring");
  }
  validate(c.analysis);
  validate(c.planner);
  if (c.server.port <= 0 || c.server.port > 65535) fail(ErrorKind::Config, "port out of range", "server");
  if (c.transcript_mode != TranscriptMode::Live && !c.transcript_path) {
    fail(ErrorKind::Config, "record and replay modes need a transcript path", "transcript");
  }
  if (c.models.default_model.empty()) fail(ErrorKind::Config, "default model id is empty", "models");
}

namespace {

void only_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(ErrorKind::Config, "section must be an object", section);
  for (const auto& [key, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::Config, "unknown key '" + key + "'", section);
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : (base / path).lexically_normal();
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_ms(const json& j, const char* key, std::chrono::milliseconds& out) {
  if (j.contains(key)) out = std::chrono::milliseconds{j.at(key).get<long long>()};
}

SourceLimits limits_from(const json& j, const char* section, SourceLimits l) {
  only_keys(j, section, {"min_interval_ms", "timeout_ms", "max_retries", "backoff_base_ms"});
  read_ms(j, "min_interval_ms", l.min_interval);
  read_ms(j, "timeout_ms", l.timeout);
  read(j, "max_retries", l.max_retries);
  read_ms(j, "backoff_base_ms", l.backoff_base);
  return l;
}

json limits_to(const SourceLimits& l) {
  return {{"min_interval_ms", l.min_interval.count()},
          {"timeout_ms", l.timeout.count()},
          {"max_retries", l.max_retries},
          {"backoff_base_ms", l.backoff_base.count()}};
}

void optional_model(const json& j, const char* key, std::optional<std::string>& out) {
  if (j.contains(key) && !j[key].is_null()) out = j[key].get<std::string>();
}

}  // namespace

PlatformConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  PlatformConfig c;
  try {
    only_keys(j, "config",
              {"taxonomy", "data_dir", "fixtures", "sources", "scoring", "analysis", "planner", "models", "provider",
               "graph", "server", "transcript"});
    if (j.contains("taxonomy")) {
      const auto& t = j["taxonomy"];
      only_keys(t, "taxonomy", {"path", "mode"});
      if (t.contains("path")) c.taxonomy_path = resolve(base_dir, t["path"].get<std::string>());
      if (t.contains("mode")) {
        const auto mode = t["mode"].get<std::string>();
        if (mode != "strict" && mode != "test") fail(ErrorKind::Config, "mode must be strict or test", "taxonomy");
        c.taxonomy_mode = mode == "strict" ? LoadMode::Strict : LoadMode::Test;
      }
    } else {
      c.taxonomy_path = resolve(base_dir, c.taxonomy_path.string());
    }
    c.data_dir = resolve(base_dir, j.value("data_dir", c.data_dir.string()));
    if (j.contains("fixtures")) {
      only_keys(j["fixtures"], "fixtures", {"routes"});
      if (j["fixtures"].contains("routes")) c.fixture_routes = resolve(base_dir, j["fixtures"]["routes"].get<std::string>());
    }
    if (j.contains("sources")) {
      const auto& s = j["sources"];
      only_keys(s, "sources",
                {"rss_feeds", "nvd_endpoint", "github_advisories_endpoint", "web_search_endpoint", "web_search_enabled",
                 "github_enabled", "github_keyword", "fetch_full_article", "nvd_keywords", "seed_queries",
                 "nvd_window_days", "max_pages", "rss_limits", "nvd_limits", "github_limits", "web_limits",
                 "min_results_threshold", "max_relaxation_rounds"});
      auto& o = c.sources;
      read(s, "rss_feeds", o.rss_feeds);
      read(s, "nvd_endpoint", o.nvd_endpoint);
      read(s, "github_advisories_endpoint", o.github_advisories_endpoint);
      read(s, "web_search_endpoint", o.web_search_endpoint);
      read(s, "web_search_enabled", o.web_search_enabled);
      read(s, "github_enabled", o.github_enabled);
      read(s, "github_keyword", o.github_keyword);
      read(s, "fetch_full_article", o.fetch_full_article);
      read(s, "nvd_keywords", o.nvd_keywords);
      read(s, "seed_queries", o.seed_queries);
      read(s, "nvd_window_days", o.nvd_window_days);
      read(s, "max_pages", o.max_pages);
      if (s.contains("rss_limits")) o.rss_limits = limits_from(s["rss_limits"], "sources.rss_limits", o.rss_limits);
      if (s.contains("nvd_limits")) o.nvd_limits = limits_from(s["nvd_limits"], "sources.nvd_limits", o.nvd_limits);
      if (s.contains("github_limits")) {
        o.github_limits = limits_from(s["github_limits"], "sources.github_limits", o.github_limits);
      }
      if (s.contains("web_limits")) o.web_limits = limits_from(s["web_limits"], "sources.web_limits", o.web_limits);
      read(s, "min_results_threshold", o.min_results_threshold);
      read(s, "max_relaxation_rounds", o.max_relaxation_rounds);
    }
    if (j.contains("scoring")) {
      try {
        from_json(j["scoring"], c.scoring);
      } catch (const Error& e) {
        fail(ErrorKind::Config, e.what(), "scoring");
      }
    }
    if (j.contains("analysis")) {
      const auto& a = j["analysis"];
      only_keys(a, "analysis",
                {"relevance_threshold", "batch_size", "max_output_tokens", "relevance_max_tokens", "upd_max_tokens"});
      read(a, "relevance_threshold", c.analysis.relevance_threshold);
      read(a, "batch_size", c.analysis.batch_size);
      read(a, "max_output_tokens", c.analysis.max_output_tokens);
      read(a, "relevance_max_tokens", c.analysis.relevance_max_tokens);
      read(a, "upd_max_tokens", c.analysis.upd_max_tokens);
    }
    if (j.contains("planner")) {
      const auto& p = j["planner"];
      only_keys(p, "planner", {"batch_size", "dedup_threshold", "max_output_tokens", "enabled_in_full_run"});
      read(p, "batch_size", c.planner.batch_size);
      read(p, "dedup_threshold", c.planner.dedup_threshold);
      read(p, "max_output_tokens", c.planner.max_output_tokens);
      read(p, "enabled_in_full_run", c.planner.enabled_in_full_run);
    }
    if (j.contains("models")) {
      const auto& m = j["models"];
      only_keys(m, "models", {"default", "keywords", "classification", "extraction", "planning"});
      read(m, "default", c.models.default_model);
      optional_model(m, "keywords", c.models.keywords);
      optional_model(m, "classification", c.models.classification);
      optional_model(m, "extraction", c.models.extraction);
      optional_model(m, "planning", c.models.planning);
    }
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      only_keys(p, "provider", {"endpoint", "api_key_env", "max_retries", "retry_backoff_ms"});
      read(p, "endpoint", c.provider.endpoint);
      read(p, "api_key_env", c.provider.api_key_env);
      read(p, "max_retries", c.provider.max_retries);
      read_ms(p, "retry_backoff_ms", c.provider.retry_backoff);
    }
    if (j.contains("graph")) {
      const auto& g = j["graph"];
      only_keys(g, "graph", {"tool_chain_nodes", "llm_extraction", "technique_nodes", "technique_keywords"});
      read(g, "tool_chain_nodes", c.graph.tool_chain_nodes);
      read(g, "llm_extraction", c.graph.llm_extraction);
      read(g, "technique_nodes", c.graph.technique_nodes);
      read(g, "technique_keywords", c.graph.extraction.technique_keywords);
    }
    if (j.contains("server")) {
      const auto& s = j["server"];
      only_keys(s, "server", {"host", "port", "cors_origin"});
      read(s, "host", c.server.host);
      read(s, "port", c.server.port);
      read(s, "cors_origin", c.server.cors_origin);
    }
    if (j.contains("transcript")) {
      const auto& t = j["transcript"];
      only_keys(t, "transcript", {"mode", "path"});
      if (t.contains("mode")) {
        auto mode = parse_transcript_mode(t["mode"].get<std::string>());
        if (!mode) fail(ErrorKind::Config, "mode must be live, record or replay", "transcript");
        c.transcript_mode = *mode;
      }
      if (t.contains("path")) c.transcript_path = resolve(base_dir, t["path"].get<std::string>());
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

json config_to_json(const PlatformConfig& c) {
  json j;
  j["taxonomy"] = {{"path", c.taxonomy_path.string()},
                   {"mode", c.taxonomy_mode == LoadMode::Strict ? "strict" : "test"}};
  j["data_dir"] = c.data_dir.string();
  if (c.fixture_routes) j["fixtures"] = {{"routes", c.fixture_routes->string()}};
  const auto& s = c.sources;
  j["sources"] = {{"rss_feeds", s.rss_feeds},
                  {"nvd_endpoint", s.nvd_endpoint},
                  {"github_advisories_endpoint", s.github_advisories_endpoint},
                  {"web_search_endpoint", s.web_search_endpoint},
                  {"web_search_enabled", s.web_search_enabled},
                  {"github_enabled", s.github_enabled},
                  {"github_keyword", s.github_keyword},
                  {"fetch_full_article", s.fetch_full_article},
                  {"nvd_keywords", s.nvd_keywords},
                  {"seed_queries", s.seed_queries},
                  {"nvd_window_days", s.nvd_window_days},
                  {"max_pages", s.max_pages},
                  {"rss_limits", limits_to(s.rss_limits)},
                  {"nvd_limits", limits_to(s.nvd_limits)},
                  {"github_limits", limits_to(s.github_limits)},
                  {"web_limits", limits_to(s.web_limits)},
                  {"min_results_threshold", s.min_results_threshold},
                  {"max_relaxation_rounds", s.max_relaxation_rounds}};
  j["scoring"] = c.scoring;
  j["analysis"] = {{"relevance_threshold", c.analysis.relevance_threshold},
                   {"batch_size", c.analysis.batch_size},
                   {"max_output_tokens", c.analysis.max_output_tokens},
                   {"relevance_max_tokens", c.analysis.relevance_max_tokens},
                   {"upd_max_tokens", c.analysis.upd_max_tokens}};
  j["planner"] = {{"batch_size", c.planner.batch_size},
                  {"dedup_threshold", c.planner.dedup_threshold},
                  {"max_output_tokens", c.planner.max_output_tokens},
                  {"enabled_in_full_run", c.planner.enabled_in_full_run}};
  json models = {{"default", c.models.default_model}};
  if (c.models.keywords) models["keywords"] = *c.models.keywords;
  if (c.models.classification) models["classification"] = *c.models.classification;
  if (c.models.extraction) models["extraction"] = *c.models.extraction;
  if (c.models.planning) models["planning"] = *c.models.planning;
  j["models"] = models;
  j["provider"] = {{"endpoint", c.provider.endpoint},
                   {"api_key_env", c.provider.api_key_env},
                   {"max_retries", c.provider.max_retries},
                   {"retry_backoff_ms", c.provider.retry_backoff.count()}};
  j["graph"] = {{"tool_chain_nodes", c.graph.tool_chain_nodes},
                {"llm_extraction", c.graph.llm_extraction},
                {"technique_nodes", c.graph.technique_nodes},
                {"technique_keywords", c.graph.extraction.technique_keywords}};
  j["server"] = {{"host", c.server.host}, {"port", c.server.port}, {"cors_origin", c.server.cors_origin}};
  json transcript = {{"mode", to_string(c.transcript_mode)}};
  if (c.transcript_path) transcript["path"] = c.transcript_path->string();
  j["transcript"] = transcript;
  return j;
}

PlatformConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config file", path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what(), path.string());
  }
  return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

void save_config(const PlatformConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << config_to_json(config).dump(2) << '\n';
  if (!out) fail(ErrorKind::Config, "cannot write config file", path.string());
}

}  // namespace threathive
