#include "threathive/serialization.hpp"

#include "threathive/error.hpp"

namespace threathive {

using nlohmann::json;

namespace {

template <typename Parser>
auto parse_enum(const json& j, Parser parse, const char* what) {
  const auto text = j.get<std::string>();
  auto v = parse(text);
  if (!v) fail(ErrorKind::Parse, std::string("unknown ") + what + " '" + text + "'");
  return *v;
}

template <typename T>
void optional_to(json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? json(*v) : json(nullptr);
}

}  // namespace

void to_json(json& j, const RiskFactors& f) {
  j = {{"L", f.severity}, {"S", f.success_rate}, {"I", f.persistence}, {"D", f.ease}};
}

void from_json(const json& j, RiskFactors& f) {
  f.severity = j.at("L").get<int>();
  f.success_rate = j.at("S").get<double>();
  f.persistence = j.at("I").get<double>();
  f.ease = j.at("D").get<double>();
}

void to_json(json& j, const ScoredRisk& s) {
  j = {{"base", s.base}, {"multiplier", s.multiplier}, {"final", s.final_score}, {"level", to_string(s.level)}};
}

void from_json(const json& j, ScoredRisk& s) {
  s.base = j.at("base").get<double>();
  s.multiplier = j.at("multiplier").get<double>();
  s.final_score = j.at("final").get<double>();
  s.level = parse_enum(j.at("level"), parse_risk_level, "risk level");
}

void to_json(json& j, const ScoringConfig& c) {
  j = {{"w_L", c.weight_severity},
       {"w_S", c.weight_success},
       {"w_I", c.weight_persistence},
       {"w_D", c.weight_ease},
       {"multiplier_semantic", c.multiplier_semantic},
       {"multiplier_chaining", c.multiplier_chaining},
       {"multiplier_observability", c.multiplier_observability},
       {"threshold_critical", c.threshold_critical},
       {"threshold_high", c.threshold_high},
       {"threshold_medium", c.threshold_medium}};
}

// Keys absent from j keep the value already in c, so a partial document
// patches an existing config.
void from_json(const json& j, ScoringConfig& c) {
  if (!j.is_object()) fail(ErrorKind::Parse, "scoring config must be an object");
  const std::pair<const char*, double*> fields[] = {
      {"w_L", &c.weight_severity},
      {"w_S", &c.weight_success},
      {"w_I", &c.weight_persistence},
      {"w_D", &c.weight_ease},
      {"multiplier_semantic", &c.multiplier_semantic},
      {"multiplier_chaining", &c.multiplier_chaining},
      {"multiplier_observability", &c.multiplier_observability},
      {"threshold_critical", &c.threshold_critical},
      {"threshold_high", &c.threshold_high},
      {"threshold_medium", &c.threshold_medium},
  };
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& [name, target] : fields) {
      if (key == name) {
        if (!value.is_number()) fail(ErrorKind::Parse, std::string("scoring field ") + name + " must be a number");
        *target = value.get<double>();
        known = true;
      }
    }
    if (!known) fail(ErrorKind::Parse, "unknown scoring field '" + key + "'");
  }
}

void to_json(json& j, FlagSet flags) {
  j = json::array();
  for (auto f : flags.members()) j.push_back(to_string(f));
}

void from_json(const json& j, FlagSet& flags) {
  flags = {};
  for (const auto& v : j) flags.insert(parse_enum(v, parse_threat_flag, "threat flag"));
}

void to_json(json& j, const IntelItem& item) {
  j = {{"id", item.id},
       {"title", item.title},
       {"content", item.content},
       {"source_url", item.source_url},
       {"source_type", to_string(item.source_type)},
       {"collected_at", format_timestamp(item.collected_at)}};
  optional_to(j, "relevance", item.relevance);
}

void from_json(const json& j, IntelItem& item) {
  item.id = j.at("id").get<std::string>();
  item.title = j.at("title").get<std::string>();
  item.content = j.at("content").get<std::string>();
  item.source_url = j.at("source_url").get<std::string>();
  item.source_type = parse_enum(j.at("source_type"), parse_source_type, "source type");
  auto ts = parse_timestamp(j.at("collected_at").get<std::string>());
  if (!ts) fail(ErrorKind::Parse, "bad collected_at", item.id);
  item.collected_at = *ts;
  if (j.contains("relevance") && !j["relevance"].is_null()) item.relevance = j["relevance"].get<double>();
}

void to_json(json& j, const SearchQuery& q) {
  j = {{"text", q.text},
       {"specificity", to_string(q.specificity)},
       {"seed_ids", q.seed_ids},
       {"relaxation_round", q.relaxation_round}};
}

void to_json(json& j, const UpdChain& chain) {
  json steps = json::array();
  for (const auto& s : chain.steps) steps.push_back({{"tool", s.tool}, {"phase", to_string(s.phase)}});
  json edges = json::array();
  for (auto e : chain.edges) edges.push_back(to_string(e));
  j = {{"steps", steps}, {"edges", edges}};
}

void from_json(const json& j, UpdChain& chain) {
  chain = {};
  for (const auto& s : j.at("steps")) {
    chain.steps.push_back({s.at("tool").get<std::string>(), parse_enum(s.at("phase"), parse_upd_phase, "UPD phase")});
  }
  for (const auto& e : j.at("edges")) chain.edges.push_back(parse_enum(e, parse_upd_edge, "UPD edge"));
}

void to_json(json& j, const ThreatCard& c) {
  j = {{"id", c.id},
       {"title", c.title},
       {"summary", c.summary},
       {"mcp_ids", c.mcp_ids},
       {"workflow_phase", to_string(c.workflow_phase)},
       {"stride", to_string(c.stride)},
       {"factors", c.factors},
       {"factors_from_model", c.factors_from_model},
       {"flags", c.flags},
       {"scored", c.scored},
       {"level", to_string(c.level)},
       {"owasp_llm", c.owasp_llm},
       {"owasp_agentic", c.owasp_agentic},
       {"source_item_ids", c.source_item_ids},
       {"cve_ids", c.cve_ids},
       {"rce_or_exfil_or_critical_asset", c.rce_or_exfil_or_critical_asset},
       {"audit_notes", c.audit_notes}};
  j["asserted_level"] = c.asserted_level ? json(to_string(*c.asserted_level)) : json(nullptr);
  optional_to(j, "asserted_score", c.asserted_score);
  optional_to(j, "upd_chain", c.upd_chain);
}

void from_json(const json& j, ThreatCard& c) {
  c.id = j.at("id").get<std::string>();
  c.title = j.at("title").get<std::string>();
  c.summary = j.value("summary", "");
  c.mcp_ids = j.at("mcp_ids").get<std::vector<std::string>>();
  c.workflow_phase = parse_enum(j.at("workflow_phase"), parse_workflow_phase, "workflow phase");
  c.stride = parse_enum(j.at("stride"), parse_stride, "STRIDE category");
  c.factors = j.at("factors").get<RiskFactors>();
  c.factors_from_model = j.value("factors_from_model", false);
  c.flags = j.at("flags").get<FlagSet>();
  c.scored = j.at("scored").get<ScoredRisk>();
  c.level = parse_enum(j.at("level"), parse_risk_level, "risk level");
  c.asserted_level.reset();
  if (j.contains("asserted_level") && !j["asserted_level"].is_null()) {
    c.asserted_level = parse_enum(j["asserted_level"], parse_risk_level, "risk level");
  }
  c.asserted_score.reset();
  if (j.contains("asserted_score") && !j["asserted_score"].is_null()) c.asserted_score = j["asserted_score"].get<double>();
  c.owasp_llm = j.value("owasp_llm", std::set<std::string>{});
  c.owasp_agentic = j.value("owasp_agentic", std::set<std::string>{});
  c.upd_chain.reset();
  if (j.contains("upd_chain") && !j["upd_chain"].is_null()) c.upd_chain = j["upd_chain"].get<UpdChain>();
  c.source_item_ids = j.value("source_item_ids", std::set<std::string>{});
  c.cve_ids = j.value("cve_ids", std::set<std::string>{});
  c.rce_or_exfil_or_critical_asset = j.value("rce_or_exfil_or_critical_asset", false);
  c.audit_notes = j.value("audit_notes", std::vector<std::string>{});
}

void to_json(json& j, const GraphNode& n) {
  j = {{"id", n.id},
       {"kind", to_string(n.kind)},
       {"canonical_label", n.canonical_label},
       {"aliases", n.aliases},
       {"concept", n.concept_tag}};
}

void to_json(json& j, const GraphEdge& e) { j = {{"kind", to_string(e.kind)}, {"src", e.src}, {"dst", e.dst}}; }

void to_json(json& j, const Mitigation& m) {
  j = {{"text", m.text}, {"priority", to_string(m.priority)}, {"effort", to_string(m.effort)}};
}

void from_json(const json& j, Mitigation& m) {
  m.text = j.at("text").get<std::string>();
  m.priority = parse_enum(j.at("priority"), parse_priority, "priority");
  m.effort = parse_enum(j.at("effort"), parse_effort, "effort");
}

void to_json(json& j, const PlanEntry& e) {
  j = {{"threat_card_id", e.threat_card_id},
       {"final_score", e.final_score},
       {"detection_methods", e.detection_methods},
       {"mitigations", e.mitigations},
       {"framework_refs", e.framework_refs},
       {"unavailable", e.unavailable}};
}

void from_json(const json& j, PlanEntry& e) {
  e.threat_card_id = j.at("threat_card_id").get<std::string>();
  e.final_score = j.at("final_score").get<double>();
  e.detection_methods = j.at("detection_methods").get<std::vector<std::string>>();
  e.mitigations = j.at("mitigations").get<std::vector<Mitigation>>();
  e.framework_refs = j.value("framework_refs", std::vector<std::string>{});
  e.unavailable = j.value("unavailable", false);
}

void to_json(json& j, const RiskPlan& p) {
  j = {{"id", p.id}, {"entries", p.entries}, {"degraded", p.degraded}, {"notes", p.notes}};
}

void from_json(const json& j, RiskPlan& p) {
  p.id = j.at("id").get<std::string>();
  p.entries = j.at("entries").get<std::vector<PlanEntry>>();
  p.degraded = j.value("degraded", false);
  p.notes = j.value("notes", std::vector<std::string>{});
}

void to_json(json& j, const RunCounts& c) {
  j = {{"items_collected", c.items_collected}, {"items_filtered", c.items_filtered},
       {"cards_produced", c.cards_produced},   {"nodes_added", c.nodes_added},
       {"edges_added", c.edges_added},         {"gateway_calls", c.gateway_calls}};
}

void from_json(const json& j, RunCounts& c) {
  c.items_collected = j.value("items_collected", 0);
  c.items_filtered = j.value("items_filtered", 0);
  c.cards_produced = j.value("cards_produced", 0);
  c.nodes_added = j.value("nodes_added", 0);
  c.edges_added = j.value("edges_added", 0);
  c.gateway_calls = j.value("gateway_calls", 0);
}

void to_json(json& j, const RunRecord& r) {
  j = {{"run_id", r.run_id},
       {"kind", to_string(r.kind)},
       {"started", format_timestamp(r.started)},
       {"counts", r.counts},
       {"status", to_string(r.status)},
       {"errors", r.errors},
       {"warnings", r.warnings},
       {"degraded", r.degraded}};
  j["finished"] = r.finished ? json(format_timestamp(*r.finished)) : json(nullptr);
  optional_to(j, "plan_id", r.plan_id);
}

void from_json(const json& j, RunRecord& r) {
  r.run_id = j.at("run_id").get<std::string>();
  r.kind = parse_enum(j.at("kind"), parse_run_kind, "run kind");
  auto started = parse_timestamp(j.at("started").get<std::string>());
  if (!started) fail(ErrorKind::Parse, "bad run start time", r.run_id);
  r.started = *started;
  r.finished.reset();
  if (j.contains("finished") && !j["finished"].is_null()) r.finished = parse_timestamp(j["finished"].get<std::string>());
  r.counts = j.value("counts", RunCounts{});
  r.status = parse_enum(j.at("status"), parse_run_status, "run status");
  r.errors = j.value("errors", std::vector<std::string>{});
  r.warnings = j.value("warnings", std::vector<std::string>{});
  r.degraded = j.value("degraded", false);
  r.plan_id.reset();
  if (j.contains("plan_id") && !j["plan_id"].is_null()) r.plan_id = j["plan_id"].get<std::string>();
}

}  // namespace threathive
