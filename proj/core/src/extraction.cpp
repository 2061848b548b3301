#include "threathive/extraction.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include <spdlog/spdlog.h>

#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"
#include "threathive/prompts.hpp"
#include "threathive/repair.hpp"
#include "threathive/similarity.hpp"

namespace threathive {

namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

void add_hit(std::vector<ExtractedEntity>& out, std::set<std::pair<NodeKind, std::string>>& seen, ExtractedEntity e) {
  if (seen.emplace(e.kind, canonicalize_label(e.label)).second) out.push_back(std::move(e));
}

}  // namespace

std::vector<ExtractedEntity> rule_extract(std::string_view text_view, const ExtractionConfig& config) {
  static const std::regex cve(R"(\bCVE-\d{4}-\d{4,}\b)", std::regex::icase);
  static const std::regex cwe(R"(\bCWE-\d{1,5}\b)", std::regex::icase);

  const std::string text(text_view);
  std::vector<ExtractedEntity> hits;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), cve); it != std::sregex_iterator(); ++it) {
    hits.push_back({upper(it->str()), NodeKind::CveIdentifier, "", static_cast<std::size_t>(it->position()),
                    static_cast<std::size_t>(it->length())});
  }
  for (auto it = std::sregex_iterator(text.begin(), text.end(), cwe); it != std::sregex_iterator(); ++it) {
    hits.push_back({upper(it->str()), NodeKind::ThreatEntity, "Vulnerability", static_cast<std::size_t>(it->position()),
                    static_cast<std::size_t>(it->length())});
  }
  const std::string lowered = detail::to_lower(text);
  for (const auto& kw : config.technique_keywords) {
    const std::string needle = detail::to_lower(kw);
    if (needle.empty()) continue;
    for (auto pos = lowered.find(needle); pos != std::string::npos; pos = lowered.find(needle, pos + 1)) {
      const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(lowered[pos - 1]));
      if (left_ok) {
        hits.push_back({needle, NodeKind::ThreatEntity, "Technique", pos, needle.size()});
        break;
      }
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const ExtractedEntity& a, const ExtractedEntity& b) { return a.offset < b.offset; });
  std::vector<ExtractedEntity> out;
  std::set<std::pair<NodeKind, std::string>> seen;
  for (auto& h : hits) add_hit(out, seen, std::move(h));
  return out;
}

LlmExtraction parse_entities(std::string_view reply) {
  static const std::map<std::string, std::pair<NodeKind, std::string>> kinds = {
      {"threat", {NodeKind::ThreatEntity, ""}},
      {"mitigation", {NodeKind::Mitigation, ""}},
      {"tool", {NodeKind::Tool, ""}},
      {"component", {NodeKind::ThreatEntity, "Component"}},
      {"technique", {NodeKind::ThreatEntity, "Technique"}},
      {"asset", {NodeKind::ThreatEntity, "Asset"}},
      {"vulnerability", {NodeKind::ThreatEntity, "Vulnerability"}},
  };
  LlmExtraction out;
  const RecordSchema schema{{{"label", true}, {"kind", true}}};
  const auto repaired = repair_output(reply, schema);
  if (repaired.records.empty() && repaired.stage == RepairStage::FieldExtraction) {
    out.degraded = true;
    return out;
  }
  std::set<std::pair<NodeKind, std::string>> seen;
  for (const auto& rec : repaired.records) {
    if (!rec.is_object() || !rec.contains("label") || !rec["label"].is_string() || !rec.contains("kind") ||
        !rec["kind"].is_string()) {
      continue;
    }
    const std::string label(detail::trim(rec["label"].get<std::string>()));
    if (label.empty()) continue;
    auto k = kinds.find(detail::fold_identifier(rec["kind"].get<std::string>()));
    if (k == kinds.end()) continue;
    add_hit(out.entities, seen, {label, k->second.first, k->second.second, 0, 0});
  }
  return out;
}

LlmExtraction llm_extract(std::string_view text, CompletionClient& gateway, const ExtractionConfig& config) {
  if (detail::trim(text).empty()) return {};
  CompletionRequest req;
  req.system_prompt = std::string(prompts::entity_extraction());
  req.user_prompt = std::string(text);
  req.model_id = config.model_id;
  req.max_output_tokens = config.max_output_tokens;
  try {
    return parse_entities(gateway.complete(req));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ReplayMismatch) throw;
    spdlog::warn("entity extraction failed: {}", e.what());
    return {{}, true};
  }
}

}  // namespace threathive
