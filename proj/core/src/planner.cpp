#include "threathive/planner.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hashing.hpp"
#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"
#include "threathive/prompts.hpp"
#include "threathive/repair.hpp"
#include "threathive/similarity.hpp"

namespace threathive {

using nlohmann::json;

std::string_view to_string(Priority p) noexcept {
  switch (p) {
    case Priority::P0: return "P0";
    case Priority::P1: return "P1";
    case Priority::P2: return "P2";
  }
  return "?";
}

std::string_view to_string(Effort e) noexcept {
  switch (e) {
    case Effort::Low: return "Low";
    case Effort::Medium: return "Medium";
    case Effort::High: return "High";
  }
  return "?";
}

std::optional<Priority> parse_priority(std::string_view text) noexcept {
  const auto f = detail::fold_identifier(text);
  for (auto p : {Priority::P0, Priority::P1, Priority::P2}) {
    if (detail::fold_identifier(to_string(p)) == f) return p;
  }
  return std::nullopt;
}

std::optional<Effort> parse_effort(std::string_view text) noexcept {
  const auto f = detail::fold_identifier(text);
  if (f == "med") return Effort::Medium;
  for (auto e : {Effort::Low, Effort::Medium, Effort::High}) {
    if (detail::fold_identifier(to_string(e)) == f) return e;
  }
  return std::nullopt;
}

void validate(const PlannerConfig& c) {
  if (c.batch_size < 1) fail(ErrorKind::Config, "planner batch_size must be positive", "planner");
  if (!(c.dedup_threshold > 0.0 && c.dedup_threshold <= 1.0)) {
    fail(ErrorKind::Config, "planner dedup_threshold must lie in (0, 1]", "planner");
  }
  if (c.max_output_tokens < 1) fail(ErrorKind::Config, "planner max_output_tokens must be positive", "planner");
}

std::string plan_id(const std::vector<std::string>& card_ids) {
  std::vector<std::string> sorted = card_ids;
  std::sort(sorted.begin(), sorted.end());
  return "plan-" + detail::sha256_hex(detail::join(sorted, ",")).substr(0, 16);
}

void order_entries(std::vector<PlanEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const PlanEntry& a, const PlanEntry& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.threat_card_id < b.threat_card_id;
  });
}

void validate(const RiskPlan& plan, const std::vector<ThreatCard>& cards) {
  std::set<std::string> known;
  for (const auto& c : cards) known.insert(c.id);
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const auto& e = plan.entries[i];
    if (!known.count(e.threat_card_id)) fail(ErrorKind::Validation, "plan entry references unknown card", e.threat_card_id);
    if (i > 0) {
      const auto& p = plan.entries[i - 1];
      if (p.final_score < e.final_score || (p.final_score == e.final_score && p.threat_card_id >= e.threat_card_id)) {
        fail(ErrorKind::Validation, "plan entries out of order", e.threat_card_id);
      }
    }
  }
}

namespace {

const RecordSchema& entry_schema() {
  static const RecordSchema schema{
      {{"card_id", true}, {"detection_methods", true}, {"mitigations", true}, {"framework_refs", false}}};
  return schema;
}

std::vector<std::string> string_list(const json& rec, const char* key) {
  std::vector<std::string> out;
  if (!rec.contains(key) || !rec[key].is_array()) return out;
  for (const auto& v : rec[key]) {
    if (!v.is_string()) continue;
    std::string s(detail::trim(v.get<std::string>()));
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::optional<Mitigation> parse_mitigation(const json& m) {
  if (!m.is_object() || !m.contains("text") || !m["text"].is_string()) return std::nullopt;
  if (!m.contains("priority") || !m["priority"].is_string() || !m.contains("effort") || !m["effort"].is_string()) {
    return std::nullopt;
  }
  const auto p = parse_priority(m["priority"].get<std::string>());
  const auto e = parse_effort(m["effort"].get<std::string>());
  std::string text(detail::trim(m["text"].get<std::string>()));
  if (!p || !e || text.empty()) return std::nullopt;
  return Mitigation{std::move(text), *p, *e};
}

std::vector<std::string> framework_refs(const ThreatCard& card, const std::vector<std::string>& model_refs) {
  static const std::regex ref(R"((MCP-\d{2}|LLM\d{2}|ASI\d{2}))");
  std::set<std::string> refs(card.mcp_ids.begin(), card.mcp_ids.end());
  refs.insert(card.owasp_llm.begin(), card.owasp_llm.end());
  refs.insert(card.owasp_agentic.begin(), card.owasp_agentic.end());
  for (const auto& r : model_refs) {
    if (std::regex_match(r, ref)) refs.insert(r);
  }
  return {refs.begin(), refs.end()};
}

json entry_json(const PlanEntry& e) {
  json mitigations = json::array();
  for (const auto& m : e.mitigations) {
    mitigations.push_back({{"text", m.text}, {"priority", to_string(m.priority)}, {"effort", to_string(m.effort)}});
  }
  return {{"card_id", e.threat_card_id},
          {"detection_methods", e.detection_methods},
          {"mitigations", mitigations},
          {"framework_refs", e.framework_refs}};
}

// Parses one planning reply into entries keyed by card id.
std::map<std::string, PlanEntry> parse_batch_reply(std::string_view raw, const std::vector<ThreatCard>& cards,
                                                   std::vector<std::string>& notes) {
  std::map<std::string, const ThreatCard*> by_id;
  for (const auto& c : cards) by_id[c.id] = &c;
  std::map<std::string, PlanEntry> out;
  for (const auto& rec : repair_output(raw, entry_schema()).records) {
    if (!rec.is_object() || !rec.contains("card_id") || !rec["card_id"].is_string()) continue;
    const std::string id = rec["card_id"];
    auto card = by_id.find(id);
    if (card == by_id.end()) {
      notes.push_back("plan entry for unknown card " + id + " ignored");
      continue;
    }
    if (out.count(id)) continue;
    PlanEntry e;
    e.threat_card_id = id;
    e.final_score = card->second->scored.final_score;
    e.detection_methods = string_list(rec, "detection_methods");
    if (rec.contains("mitigations") && rec["mitigations"].is_array()) {
      for (const auto& m : rec["mitigations"]) {
        if (auto parsed = parse_mitigation(m)) {
          e.mitigations.push_back(std::move(*parsed));
        } else {
          notes.push_back("mitigation without valid text, priority or effort dropped for " + id);
        }
      }
    }
    e.framework_refs = framework_refs(*card->second, string_list(rec, "framework_refs"));
    out.emplace(id, std::move(e));
  }
  return out;
}

}  // namespace

std::string plan_batch_user_prompt(const std::vector<ThreatCard>& cards) {
  json arr = json::array();
  for (const auto& c : cards) {
    arr.push_back({{"card_id", c.id},
                   {"title", c.title},
                   {"summary", c.summary},
                   {"mcp_ids", c.mcp_ids},
                   {"stride", to_string(c.stride)},
                   {"risk_level", to_string(c.level)},
                   {"risk_score", c.scored.final_score},
                   {"owasp_llm", c.owasp_llm},
                   {"owasp_agentic", c.owasp_agentic}});
  }
  return "Threat cards:\n" + arr.dump(2);
}

PartialPlan plan_batch(const std::vector<ThreatCard>& cards, CompletionClient& gateway, const PlannerConfig& config) {
  if (cards.empty()) fail(ErrorKind::Precondition, "empty planning batch");
  CompletionRequest req;
  req.system_prompt = std::string(prompts::plan_batch());
  req.user_prompt = plan_batch_user_prompt(cards);
  req.model_id = config.model_id;
  req.max_output_tokens = config.max_output_tokens;

  PartialPlan result;
  std::map<std::string, PlanEntry> got;
  for (int attempt = 0; attempt < 2 && got.size() < cards.size(); ++attempt) {
    try {
      auto parsed = parse_batch_reply(gateway.complete(req), cards, result.notes);
      for (auto& [id, e] : parsed) got.try_emplace(id, std::move(e));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ReplayMismatch) throw;
      result.notes.push_back(std::string("planning call failed: ") + e.what());
    }
  }
  for (const auto& c : cards) {
    auto it = got.find(c.id);
    if (it != got.end()) {
      result.entries.push_back(std::move(it->second));
      continue;
    }
    PlanEntry placeholder;
    placeholder.threat_card_id = c.id;
    placeholder.final_score = c.scored.final_score;
    placeholder.framework_refs = framework_refs(c, {});
    placeholder.unavailable = true;
    result.entries.push_back(std::move(placeholder));
    result.degraded = true;
    result.notes.push_back("plan unavailable for " + c.id);
  }
  return result;
}

std::vector<PlanEntry> aggregate(std::vector<PlanEntry> partials, double threshold) {
  std::vector<PlanEntry> merged;
  std::map<std::string, std::size_t> index;
  for (auto& e : partials) {
    auto [it, fresh] = index.emplace(e.threat_card_id, merged.size());
    if (fresh) {
      merged.push_back(std::move(e));
      continue;
    }
    auto& target = merged[it->second];
    target.detection_methods.insert(target.detection_methods.end(), e.detection_methods.begin(),
                                    e.detection_methods.end());
    target.mitigations.insert(target.mitigations.end(), e.mitigations.begin(), e.mitigations.end());
    std::set<std::string> refs(target.framework_refs.begin(), target.framework_refs.end());
    refs.insert(e.framework_refs.begin(), e.framework_refs.end());
    target.framework_refs.assign(refs.begin(), refs.end());
    target.unavailable = target.unavailable && e.unavailable;
  }

  for (auto& e : merged) {
    std::vector<Mitigation> kept;
    std::vector<std::set<std::string>> kept_shingles;
    for (auto& m : e.mitigations) {
      auto sh = shingles(m.text);
      bool absorbed = false;
      for (std::size_t i = 0; i < kept.size(); ++i) {
        if (jaccard(sh, kept_shingles[i]) >= threshold) {
          kept[i].priority = std::min(kept[i].priority, m.priority);
          absorbed = true;
          break;
        }
      }
      if (!absorbed) {
        kept.push_back(std::move(m));
        kept_shingles.push_back(std::move(sh));
      }
    }
    e.mitigations = std::move(kept);

    std::vector<std::string> methods;
    std::set<std::string> seen;
    for (auto& d : e.detection_methods) {
      if (seen.insert(canonicalize_label(d)).second) methods.push_back(std::move(d));
    }
    e.detection_methods = std::move(methods);
  }
  order_entries(merged);
  return merged;
}

RiskPlan refine(std::vector<PlanEntry> merged, CompletionClient& gateway, const PlannerConfig& config) {
  RiskPlan plan;
  std::vector<std::string> ids;
  for (const auto& e : merged) ids.push_back(e.threat_card_id);
  plan.id = plan_id(ids);
  plan.entries = std::move(merged);
  if (plan.entries.empty()) return plan;

  json doc = json::array();
  for (const auto& e : plan.entries) doc.push_back(entry_json(e));
  CompletionRequest req;
  req.system_prompt = std::string(prompts::plan_refine());
  req.user_prompt = "Merged plan:\n" + doc.dump(2);
  req.model_id = config.model_id;
  req.max_output_tokens = config.max_output_tokens;

  std::string raw;
  try {
    raw = gateway.complete(req);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ReplayMismatch) throw;
    plan.degraded = true;
    plan.notes.push_back(std::string("refinement unavailable: ") + e.what());
    return plan;
  }

  auto revert = [&plan](std::string why) {
    plan.degraded = true;
    plan.notes.push_back("refinement reverted: " + std::move(why));
    return plan;
  };
  const auto records = repair_output(raw, entry_schema()).records;
  if (records.size() != plan.entries.size()) return revert("entry count changed");
  std::vector<PlanEntry> refined = plan.entries;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    auto& e = refined[i];
    if (!rec.is_object() || !rec.contains("card_id") || rec["card_id"] != e.threat_card_id) {
      return revert("entry set or order changed at position " + std::to_string(i));
    }
    if (!rec.contains("mitigations") || !rec["mitigations"].is_array() ||
        rec["mitigations"].size() != e.mitigations.size()) {
      return revert("mitigation count changed for " + e.threat_card_id);
    }
    for (std::size_t j = 0; j < e.mitigations.size(); ++j) {
      const auto m = parse_mitigation(rec["mitigations"][j]);
      if (!m || m->priority != e.mitigations[j].priority || m->effort != e.mitigations[j].effort) {
        return revert("priority or effort changed for " + e.threat_card_id);
      }
      e.mitigations[j].text = m->text;
    }
    auto methods = string_list(rec, "detection_methods");
    if (methods.empty() && !e.detection_methods.empty()) return revert("detection methods removed");
    e.detection_methods = std::move(methods);
  }
  plan.entries = std::move(refined);
  return plan;
}

RiskPlan build_plan(const std::vector<ThreatCard>& cards, CompletionClient& gateway, const PlannerConfig& config) {
  std::vector<ThreatCard> ordered = cards;
  std::stable_sort(ordered.begin(), ordered.end(), [](const ThreatCard& a, const ThreatCard& b) {
    if (a.scored.final_score != b.scored.final_score) return a.scored.final_score > b.scored.final_score;
    return a.id < b.id;
  });
  std::vector<PlanEntry> partials;
  bool degraded = false;
  std::vector<std::string> notes;
  const auto step = static_cast<std::size_t>(std::max(config.batch_size, 1));
  for (std::size_t i = 0; i < ordered.size(); i += step) {
    std::vector<ThreatCard> batch(ordered.begin() + static_cast<std::ptrdiff_t>(i),
                                  ordered.begin() + static_cast<std::ptrdiff_t>(std::min(i + step, ordered.size())));
    auto partial = plan_batch(batch, gateway, config);
    degraded = degraded || partial.degraded;
    notes.insert(notes.end(), partial.notes.begin(), partial.notes.end());
    partials.insert(partials.end(), partial.entries.begin(), partial.entries.end());
  }
  auto plan = refine(aggregate(std::move(partials), config.dedup_threshold), gateway, config);
  plan.degraded = plan.degraded || degraded;
  notes.insert(notes.end(), plan.notes.begin(), plan.notes.end());
  plan.notes = std::move(notes);
  return plan;
}

}  // namespace threathive
