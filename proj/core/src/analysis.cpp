#include "threathive/analysis.hpp"

#include <cmath>
#include <regex>

#include <spdlog/spdlog.h>

#include "hashing.hpp"
#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"
#include "threathive/prompts.hpp"
#include "threathive/similarity.hpp"

namespace threathive {

using nlohmann::json;

std::string_view to_string(UpdPhase phase) noexcept {
  switch (phase) {
    case UpdPhase::ParasiticIngestion: return "ParasiticIngestion";
    case UpdPhase::PrivacyCollection: return "PrivacyCollection";
    case UpdPhase::PrivacyDisclosure: return "PrivacyDisclosure";
  }
  return "?";
}

std::string_view to_string(UpdEdge edge) noexcept { return edge == UpdEdge::T2T ? "T2T" : "UPD"; }

std::optional<UpdPhase> parse_upd_phase(std::string_view text) noexcept {
  const auto f = detail::fold_identifier(text);
  for (auto p : {UpdPhase::ParasiticIngestion, UpdPhase::PrivacyCollection, UpdPhase::PrivacyDisclosure}) {
    if (detail::fold_identifier(to_string(p)) == f) return p;
  }
  return std::nullopt;
}

std::optional<UpdEdge> parse_upd_edge(std::string_view text) noexcept {
  const auto f = detail::fold_identifier(text);
  if (f == "t2t") return UpdEdge::T2T;
  if (f == "upd") return UpdEdge::UPD;
  return std::nullopt;
}

bool is_valid(const UpdChain& chain) noexcept {
  if (chain.steps.size() < 2 || chain.edges.size() + 1 != chain.steps.size()) return false;
  for (std::size_t i = 0; i + 1 < chain.edges.size(); ++i) {
    if (chain.edges[i] == UpdEdge::UPD) return false;
  }
  for (const auto& s : chain.steps) {
    if (detail::trim(s.tool).empty()) return false;
  }
  return true;
}

std::string threat_card_id(const std::set<std::string>& source_item_ids, std::string_view title,
                           const std::vector<std::string>& mcp_ids) {
  const std::string sources = detail::join({source_item_ids.begin(), source_item_ids.end()}, ",");
  const std::string ids = detail::join(mcp_ids, ",");
  return "card-" + detail::fields_digest({sources, canonicalize_label(title), ids}).substr(0, 16);
}

void validate(const ThreatCard& card, const TaxonomyRegistry& registry, const ScoringConfig& scoring) {
  if (card.mcp_ids.empty()) fail(ErrorKind::Validation, "card has no taxonomy ids", card.id);
  for (const auto& id : card.mcp_ids) {
    if (!registry.contains(id)) fail(ErrorKind::Validation, "card references unknown taxonomy id " + id, card.id);
  }
  validate(card.factors);
  const auto expected = final_score(card.factors, card.flags, scoring);
  if (!(expected == card.scored)) fail(ErrorKind::Validation, "scored risk is stale", card.id);
  const auto bridge = bridge_to_frameworks({card.mcp_ids.begin(), card.mcp_ids.end()}, registry);
  if (bridge.owasp_llm != card.owasp_llm || bridge.owasp_agentic != card.owasp_agentic) {
    fail(ErrorKind::Validation, "framework mapping differs from the bridge", card.id);
  }
  if (card.upd_chain && !is_valid(*card.upd_chain)) fail(ErrorKind::Validation, "invalid UPD chain", card.id);
  if (card.level == RiskLevel::Critical &&
      !(card.scored.final_score > scoring.threshold_critical && card.rce_or_exfil_or_critical_asset)) {
    fail(ErrorKind::Validation, "Critical level without gate conditions", card.id);
  }
}

void validate(const AnalysisConfig& c) {
  if (!(c.relevance_threshold >= 0.0 && c.relevance_threshold <= 1.0)) {
    fail(ErrorKind::Config, "relevance_threshold must lie in [0, 1]", "analysis");
  }
  if (c.batch_size < 3 || c.batch_size > 5) fail(ErrorKind::Config, "batch_size must lie in [3, 5]", "analysis");
  if (c.max_output_tokens < 1 || c.relevance_max_tokens < 1 || c.upd_max_tokens < 1) {
    fail(ErrorKind::Config, "token budgets must be positive", "analysis");
  }
}

std::optional<double> parse_relevance(std::string_view reply) {
  static const std::regex number(R"re((^|[^0-9.])(\d+(\.\d+)?|\.\d+))re");
  const std::string text(reply);
  std::smatch m;
  if (!std::regex_search(text, m, number)) return std::nullopt;
  const double v = std::stod(m[2].str());
  if (!(v >= 0.0 && v <= 1.0)) return std::nullopt;
  return v;
}

RelevanceResult score_relevance(IntelItem& item, CompletionClient& gateway, const AnalysisConfig& config) {
  if (detail::trim(item.content).empty()) fail(ErrorKind::Precondition, "item has no content", item.id);
  CompletionRequest req;
  req.system_prompt = std::string(prompts::relevance());
  req.user_prompt = "Title: " + item.title + "\nSource: " + item.source_url + "\n\n" + item.content;
  req.model_id = config.model_id;
  req.max_output_tokens = config.relevance_max_tokens;

  RelevanceResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      if (auto v = parse_relevance(gateway.complete(req))) {
        result.score = *v;
        item.relevance = *v;
        return result;
      }
      spdlog::warn("unparseable relevance reply for {} (attempt {})", item.id, attempt + 1);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ReplayMismatch) throw;
      spdlog::warn("relevance call failed for {}: {}", item.id, e.what());
    }
  }
  result.degraded = true;
  item.relevance = 0.0;
  return result;
}

std::vector<IntelItem> filter_relevant(const std::vector<IntelItem>& items, double theta) {
  std::vector<IntelItem> out;
  for (const auto& item : items) {
    if (!item.relevance) fail(ErrorKind::Validation, "item has not been scored", item.id);
    if (*item.relevance > theta) out.push_back(item);
  }
  return out;
}

const RecordSchema& threat_record_schema() {
  static const RecordSchema schema{{
      {"item_index", true},
      {"title", true},
      {"summary", false},
      {"workflow_phase", true},
      {"mcp_ids", true},
      {"stride", true},
      {"factors", false},
      {"risk_level", false},
      {"risk_score", false},
      {"critical_impact", false},
      {"cve_ids", false},
  }};
  return schema;
}

std::string threat_analysis_user_prompt(const std::vector<IntelItem>& items, const TaxonomyRegistry& registry) {
  std::string out = "Taxonomy (id | name | workflow phase | attack surface | primary STRIDE):\n";
  for (const auto& [id, p] : registry.entries()) {
    out += id + " | " + p.name + " | " + std::string(to_string(p.workflow_phase)) + " | " +
           std::string(to_string(p.attack_surface)) + " | " + std::string(to_string(p.stride_primary)) + "\n";
  }
  out += "\nItems:\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += "[" + std::to_string(i) + "] " + items[i].title + "\nSource: " + items[i].source_url + "\n" +
           items[i].content + "\n\n";
  }
  return out;
}

namespace {

void note(std::vector<std::string>* notes, std::string text) {
  spdlog::debug("{}", text);
  if (notes) notes->push_back(std::move(text));
}

std::optional<std::string> string_field(const json& rec, const char* key) {
  if (!rec.contains(key) || !rec[key].is_string()) return std::nullopt;
  std::string v(detail::trim(rec[key].get<std::string>()));
  if (v.empty()) return std::nullopt;
  return v;
}

std::string normalize_mcp_id(std::string_view raw) {
  // Accept "MCP-5", "mcp 05", "MCP05".
  std::string digits;
  for (char c : raw) {
    if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
  }
  if (digits.empty() || digits.size() > 2 || detail::fold_identifier(raw).rfind("mcp", 0) != 0) return std::string(raw);
  if (digits.size() == 1) digits.insert(digits.begin(), '0');
  return "MCP-" + digits;
}

std::optional<RiskFactors> factors_field(const json& rec) {
  if (!rec.contains("factors") || !rec["factors"].is_object()) return std::nullopt;
  const auto& f = rec["factors"];
  for (const char* k : {"L", "S", "I", "D"}) {
    if (!f.contains(k) || !f[k].is_number()) return std::nullopt;
  }
  RiskFactors out;
  const double l = f["L"].get<double>();
  if (l != std::floor(l)) return std::nullopt;
  out.severity = static_cast<int>(l);
  out.success_rate = f["S"].get<double>();
  out.persistence = f["I"].get<double>();
  out.ease = f["D"].get<double>();
  try {
    validate(out);
  } catch (const Error&) {
    return std::nullopt;
  }
  return out;
}

}  // namespace

std::optional<ThreatCard> card_from_record(const json& rec, const std::vector<IntelItem>& items,
                                           const TaxonomyRegistry& registry, const ScoringConfig& scoring,
                                           std::vector<std::string>* notes) {
  if (!rec.is_object()) {
    note(notes, "record is not an object");
    return std::nullopt;
  }
  if (!rec.contains("item_index") || !rec["item_index"].is_number_integer()) {
    note(notes, "record without integer item_index dropped");
    return std::nullopt;
  }
  const auto idx = rec["item_index"].get<long long>();
  if (idx < 0 || static_cast<std::size_t>(idx) >= items.size()) {
    note(notes, "record item_index " + std::to_string(idx) + " out of range");
    return std::nullopt;
  }
  ThreatCard card;
  auto title = string_field(rec, "title");
  if (!title) {
    note(notes, "record without title dropped");
    return std::nullopt;
  }
  card.title = *title;
  card.summary = string_field(rec, "summary").value_or("");

  const auto phase = string_field(rec, "workflow_phase");
  const auto stride = string_field(rec, "stride");
  const auto parsed_phase = phase ? parse_workflow_phase(*phase) : std::nullopt;
  const auto parsed_stride = stride ? parse_stride(*stride) : std::nullopt;
  if (!parsed_phase || !parsed_stride) {
    note(notes, "record '" + card.title + "' has an invalid workflow_phase or stride");
    return std::nullopt;
  }
  card.workflow_phase = *parsed_phase;
  card.stride = *parsed_stride;

  if (rec.contains("mcp_ids") && rec["mcp_ids"].is_array()) {
    for (const auto& v : rec["mcp_ids"]) {
      if (!v.is_string()) continue;
      const std::string id = normalize_mcp_id(detail::trim(v.get<std::string>()));
      if (!registry.contains(id)) {
        note(notes, "unknown taxonomy id " + id + " ignored");
        continue;
      }
      if (std::find(card.mcp_ids.begin(), card.mcp_ids.end(), id) == card.mcp_ids.end()) card.mcp_ids.push_back(id);
    }
  }
  if (card.mcp_ids.empty()) {
    note(notes, "record '" + card.title + "' has no valid taxonomy ids");
    return std::nullopt;
  }

  if (auto f = factors_field(rec)) {
    card.factors = *f;
    card.factors_from_model = true;
  } else {
    card.factors = registry.at(card.mcp_ids.front()).baseline_factors;
    card.audit_notes.push_back("factors missing or out of domain; baseline of " + card.mcp_ids.front() + " used");
  }
  card.flags = combined_flags(card.mcp_ids, registry);

  if (auto lvl = string_field(rec, "risk_level")) card.asserted_level = parse_risk_level(*lvl);
  if (rec.contains("risk_score") && rec["risk_score"].is_number()) card.asserted_score = rec["risk_score"].get<double>();
  card.rce_or_exfil_or_critical_asset = rec.contains("critical_impact") && rec["critical_impact"].is_boolean() &&
                                        rec["critical_impact"].get<bool>();

  static const std::regex cve(R"(CVE-\d{4}-\d{4,})", std::regex::icase);
  if (rec.contains("cve_ids") && rec["cve_ids"].is_array()) {
    for (const auto& v : rec["cve_ids"]) {
      if (!v.is_string()) continue;
      std::string s = detail::to_lower(detail::trim(v.get<std::string>()));
      std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
      if (std::regex_match(s, cve)) card.cve_ids.insert(s);
    }
  }

  card.source_item_ids.insert(items[static_cast<std::size_t>(idx)].id);
  const auto bridge = bridge_to_frameworks({card.mcp_ids.begin(), card.mcp_ids.end()}, registry);
  card.owasp_llm = bridge.owasp_llm;
  card.owasp_agentic = bridge.owasp_agentic;
  card.id = threat_card_id(card.source_item_ids, card.title, card.mcp_ids);
  return rescore(std::move(card), scoring);
}

BatchResult analyze_batch(const std::vector<IntelItem>& items, const TaxonomyRegistry& registry,
                          CompletionClient& gateway, const ScoringConfig& scoring, const AnalysisConfig& config) {
  if (items.empty()) fail(ErrorKind::Precondition, "empty batch");
  if (items.size() > static_cast<std::size_t>(config.batch_size)) {
    fail(ErrorKind::Precondition, "batch exceeds batch_size");
  }
  for (const auto& item : items) {
    if (!item.relevance || !(*item.relevance > config.relevance_threshold)) {
      fail(ErrorKind::Precondition, "item did not pass the relevance filter", item.id);
    }
  }

  CompletionRequest req;
  req.system_prompt = std::string(prompts::threat_analysis());
  req.user_prompt = threat_analysis_user_prompt(items, registry);
  req.model_id = config.model_id;
  req.max_output_tokens = config.max_output_tokens;
  req.purpose = RequestPurpose::Classification;

  BatchResult result;
  std::string raw;
  try {
    raw = gateway.complete(req);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ReplayMismatch) throw;
    result.failed = true;
    result.stage = RepairStage::FieldExtraction;
    result.notes.push_back(std::string("gateway failure: ") + e.what());
    return result;
  }

  const auto repaired = repair_output(raw, threat_record_schema());
  result.stage = repaired.stage;
  result.dropped = repaired.dropped;
  std::set<std::string> seen;
  for (const auto& rec : repaired.records) {
    auto card = card_from_record(rec, items, registry, scoring, &result.notes);
    if (!card) {
      ++result.dropped;
      continue;
    }
    if (!seen.insert(card->id).second) continue;
    result.cards.push_back(std::move(*card));
  }
  if (repaired.records.empty() && repaired.stage == RepairStage::FieldExtraction) {
    result.failed = true;
    result.notes.push_back("no recoverable threat records");
  }
  return result;
}

ThreatCard rescore(ThreatCard card, const ScoringConfig& scoring) {
  card.scored = final_score(card.factors, card.flags, scoring);
  return enforce_consistency(std::move(card), scoring);
}

ThreatCard enforce_consistency(ThreatCard card, const ScoringConfig& scoring) {
  const RiskLevel derived = classify_level(card.scored.final_score, scoring);
  card.scored.level = derived;
  RiskLevel effective = derived;
  const bool claims_critical = derived == RiskLevel::Critical || card.asserted_level == RiskLevel::Critical;
  if (claims_critical &&
      (card.scored.final_score <= scoring.threshold_critical || !card.rce_or_exfil_or_critical_asset)) {
    effective = std::min(derived, RiskLevel::High);
    std::string why = card.scored.final_score <= scoring.threshold_critical
                          ? "score does not exceed the critical threshold"
                          : "no remote code execution, exfiltration or critical asset impact";
    card.audit_notes.push_back("Critical downgraded to " + std::string(to_string(effective)) + ": " + why);
  }
  if (card.asserted_level && *card.asserted_level != effective) {
    const std::string msg = "model asserted " + std::string(to_string(*card.asserted_level)) + ", recomputed " +
                            std::string(to_string(effective));
    if (std::find(card.audit_notes.begin(), card.audit_notes.end(), msg) == card.audit_notes.end()) {
      card.audit_notes.push_back(msg);
    }
  }
  card.level = effective;
  return card;
}

std::string upd_chain_user_prompt(const ThreatCard& card) {
  return "Threat: " + card.title + "\nTaxonomy ids: " + detail::join(card.mcp_ids, ", ") + "\nSummary: " + card.summary;
}

UpdResult parse_upd_chain(std::string_view reply) {
  UpdResult result;
  const RecordSchema schema{{{"steps", true}, {"edges", true}}};
  const auto repaired = repair_output(reply, schema);
  if (repaired.records.size() != 1) {
    result.degraded = true;
    return result;
  }
  const auto& rec = repaired.records.front();
  if (!rec["steps"].is_array() || !rec["edges"].is_array()) {
    result.degraded = true;
    return result;
  }
  UpdChain chain;
  for (const auto& s : rec["steps"]) {
    const auto tool = s.is_object() ? string_field(s, "tool") : std::nullopt;
    const auto phase = s.is_object() && s.contains("phase") && s["phase"].is_string()
                           ? parse_upd_phase(s["phase"].get<std::string>())
                           : std::nullopt;
    if (!tool || !phase) {
      result.degraded = true;
      return result;
    }
    chain.steps.push_back({*tool, *phase});
  }
  for (const auto& e : rec["edges"]) {
    const auto edge = e.is_string() ? parse_upd_edge(e.get<std::string>()) : std::nullopt;
    if (!edge) {
      result.degraded = true;
      return result;
    }
    chain.edges.push_back(*edge);
  }
  if (chain.steps.size() < 2 && chain.edges.empty()) return result;  // no chain described
  if (!is_valid(chain)) {
    result.degraded = true;
    return result;
  }
  result.chain = std::move(chain);
  return result;
}

UpdResult annotate_upd_chain(const ThreatCard& card, CompletionClient& gateway, const AnalysisConfig& config) {
  CompletionRequest req;
  req.system_prompt = std::string(prompts::upd_chain());
  req.user_prompt = upd_chain_user_prompt(card);
  req.model_id = config.model_id;
  req.max_output_tokens = config.upd_max_tokens;
  try {
    auto r = parse_upd_chain(gateway.complete(req));
    if (r.degraded) spdlog::warn("UPD chain reply for {} rejected", card.id);
    return r;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ReplayMismatch) throw;
    spdlog::warn("UPD chain call failed for {}: {}", card.id, e.what());
    return {std::nullopt, true};
  }
}

}  // namespace threathive
