#include "threathive/taxonomy.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "text_util.hpp"
#include "threathive/error.hpp"

namespace threathive {

using nlohmann::json;

std::string_view to_string(StrideCategory c) noexcept {
  switch (c) {
    case StrideCategory::Spoofing: return "Spoofing";
    case StrideCategory::Tampering: return "Tampering";
    case StrideCategory::Repudiation: return "Repudiation";
    case StrideCategory::InformationDisclosure: return "InformationDisclosure";
    case StrideCategory::DenialOfService: return "DenialOfService";
    case StrideCategory::ElevationOfPrivilege: return "ElevationOfPrivilege";
  }
  return "?";
}

std::string_view to_string(WorkflowPhase p) noexcept {
  switch (p) {
    case WorkflowPhase::TaskPlanning: return "TaskPlanning";
    case WorkflowPhase::ToolInvocation: return "ToolInvocation";
    case WorkflowPhase::ResponseHandling: return "ResponseHandling";
    case WorkflowPhase::CrossPhase: return "CrossPhase";
  }
  return "?";
}

std::string_view to_string(AttackSurface s) noexcept {
  switch (s) {
    case AttackSurface::ServerApis: return "ServerAPIs";
    case AttackSurface::ToolMetadata: return "ToolMetadata";
    case AttackSurface::RuntimeFlow: return "RuntimeFlow";
    case AttackSurface::Transport: return "Transport";
  }
  return "?";
}

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> parse_folded(std::string_view text, const std::array<Enum, N>& values) {
  const std::string folded = detail::fold_identifier(text);
  for (auto v : values) {
    if (detail::fold_identifier(to_string(v)) == folded) return v;
  }
  return std::nullopt;
}

constexpr std::array<WorkflowPhase, 4> kPhases = {WorkflowPhase::TaskPlanning, WorkflowPhase::ToolInvocation,
                                                  WorkflowPhase::ResponseHandling, WorkflowPhase::CrossPhase};

}  // namespace

std::optional<StrideCategory> parse_stride(std::string_view text) noexcept {
  try {
    return parse_folded(text, kStrideCategories);
  } catch (...) {
    return std::nullopt;
  }
}

std::optional<WorkflowPhase> parse_workflow_phase(std::string_view text) noexcept {
  try {
    return parse_folded(text, kPhases);
  } catch (...) {
    return std::nullopt;
  }
}

std::optional<AttackSurface> parse_attack_surface(std::string_view text) noexcept {
  try {
    return parse_folded(text, kAttackSurfaces);
  } catch (...) {
    return std::nullopt;
  }
}

std::size_t index_of(AttackSurface s) noexcept { return static_cast<std::size_t>(s); }
std::size_t index_of(StrideCategory c) noexcept { return static_cast<std::size_t>(c); }

bool is_valid_taxonomy_id(std::string_view id) noexcept {
  if (id.size() != 6 || id.substr(0, 4) != "MCP-") return false;
  const char a = id[4], b = id[5];
  if (a < '0' || a > '9' || b < '0' || b > '9') return false;
  const int n = (a - '0') * 10 + (b - '0');
  return n >= 1 && n <= 38;
}

TaxonomyRegistry::TaxonomyRegistry(std::string version, std::vector<std::string> matrix_categories,
                                   std::map<std::string, ThreatPattern> entries, bool partial)
    : version_(std::move(version)),
      matrix_categories_(std::move(matrix_categories)),
      entries_(std::move(entries)),
      partial_(partial) {}

bool TaxonomyRegistry::contains(std::string_view id) const { return find(id) != nullptr; }

const ThreatPattern* TaxonomyRegistry::find(std::string_view id) const {
  auto it = entries_.find(std::string(id));
  return it == entries_.end() ? nullptr : &it->second;
}

const ThreatPattern& TaxonomyRegistry::at(std::string_view id) const {
  if (const auto* p = find(id)) return *p;
  fail(ErrorKind::Lookup, "unknown taxonomy id", std::string(id));
}

namespace {

const std::set<std::string> kKnownEntryFields = {
    "id",          "name",          "description",      "workflow_phase", "attack_surface",
    "stride_primary", "flags",      "baseline_factors", "owasp_llm",      "owasp_agentic",
    "matrix_cells", "flags_source", "provenance"};

std::string require_string(const json& entry, const char* key, const std::string& who) {
  if (!entry.contains(key) || !entry.at(key).is_string()) {
    fail(ErrorKind::Validation, std::string("field '") + key + "' must be a string", who);
  }
  return entry.at(key).get<std::string>();
}

std::set<std::string> string_set(const json& entry, const char* key, const std::string& who) {
  std::set<std::string> out;
  if (!entry.contains(key)) return out;
  const json& arr = entry.at(key);
  if (!arr.is_array()) fail(ErrorKind::Validation, std::string("field '") + key + "' must be a list", who);
  for (const auto& v : arr) {
    if (!v.is_string() || v.get<std::string>().empty()) {
      fail(ErrorKind::Validation, std::string("field '") + key + "' must contain non-empty strings", who);
    }
    out.insert(v.get<std::string>());
  }
  return out;
}

ThreatPattern parse_entry(const json& entry, std::size_t position) {
  std::string who = "entry #" + std::to_string(position);
  if (!entry.is_object()) fail(ErrorKind::Validation, "entry must be an object", who);
  if (entry.contains("id") && entry.at("id").is_string()) who = entry.at("id").get<std::string>();

  for (const auto& [key, _] : entry.items()) {
    if (!kKnownEntryFields.count(key)) fail(ErrorKind::Validation, "unknown field '" + key + "'", who);
  }

  ThreatPattern p;
  p.id = require_string(entry, "id", who);
  if (!is_valid_taxonomy_id(p.id)) fail(ErrorKind::Validation, "id must match MCP-01..MCP-38", who);
  p.name = require_string(entry, "name", who);
  if (p.name.empty()) fail(ErrorKind::Validation, "name must be non-empty", who);
  p.description = require_string(entry, "description", who);

  auto phase = parse_workflow_phase(require_string(entry, "workflow_phase", who));
  if (!phase) fail(ErrorKind::Validation, "unknown workflow_phase", who);
  p.workflow_phase = *phase;
  auto surface = parse_attack_surface(require_string(entry, "attack_surface", who));
  if (!surface) fail(ErrorKind::Validation, "unknown attack_surface", who);
  p.attack_surface = *surface;
  auto stride = parse_stride(require_string(entry, "stride_primary", who));
  if (!stride) fail(ErrorKind::Validation, "stride_primary must be one of the six STRIDE categories", who);
  p.stride_primary = *stride;

  for (const auto& name : string_set(entry, "flags", who)) {
    auto flag = parse_threat_flag(name);
    if (!flag) fail(ErrorKind::Validation, "unknown flag '" + name + "'", who);
    p.flags.insert(*flag);
  }

  if (!entry.contains("baseline_factors") || !entry.at("baseline_factors").is_object()) {
    fail(ErrorKind::Validation, "baseline_factors must be an object with L, S, I, D", who);
  }
  const json& bf = entry.at("baseline_factors");
  for (const char* k : {"L", "S", "I", "D"}) {
    if (!bf.contains(k) || !bf.at(k).is_number()) {
      fail(ErrorKind::Validation, std::string("baseline_factors.") + k + " must be a number", who);
    }
  }
  if (!bf.at("L").is_number_integer()) fail(ErrorKind::Validation, "baseline_factors.L must be an integer", who);
  p.baseline_factors = RiskFactors{bf.at("L").get<int>(), bf.at("S").get<double>(), bf.at("I").get<double>(),
                                   bf.at("D").get<double>()};
  try {
    validate(p.baseline_factors);
  } catch (const Error& e) {
    fail(ErrorKind::Validation, std::string("baseline_factors out of range: ") + e.what(), who);
  }

  p.owasp_llm = string_set(entry, "owasp_llm", who);
  p.owasp_agentic = string_set(entry, "owasp_agentic", who);

  if (entry.contains("matrix_cells")) {
    const json& cells = entry.at("matrix_cells");
    if (!cells.is_array()) fail(ErrorKind::Validation, "matrix_cells must be a list of [surface, category]", who);
    for (const auto& cell : cells) {
      if (!cell.is_array() || cell.size() != 2 || !cell[0].is_number_integer() || !cell[1].is_number_integer()) {
        fail(ErrorKind::Validation, "matrix cell must be a [surface, category] integer pair", who);
      }
      const auto s = cell[0].get<long long>();
      const auto c = cell[1].get<long long>();
      if (s < 0 || s >= static_cast<long long>(kMatrixSurfaces) || c < 0 ||
          c >= static_cast<long long>(kMatrixCategories)) {
        fail(ErrorKind::Validation, "matrix cell outside the 4x17 grid", who);
      }
      p.matrix_cells.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(c)});
    }
  }
  return p;
}

}  // namespace

TaxonomyRegistry parse_taxonomy(std::string_view text, LoadMode mode) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Parse, std::string("malformed taxonomy file: ") + e.what(), "taxonomy");
  }
  if (!doc.is_object()) fail(ErrorKind::Parse, "taxonomy file must be an object", "taxonomy");
  if (doc.value("format", std::string{}) != "mcp38-taxonomy") {
    fail(ErrorKind::Validation, "format must be \"mcp38-taxonomy\"", "taxonomy");
  }
  if (!doc.contains("version") || !doc.at("version").is_string()) {
    fail(ErrorKind::Validation, "version string missing", "taxonomy");
  }
  if (!doc.contains("entries") || !doc.at("entries").is_array()) {
    fail(ErrorKind::Validation, "entries list missing", "taxonomy");
  }

  std::vector<std::string> categories;
  if (doc.contains("matrix_categories")) {
    for (const auto& c : doc.at("matrix_categories")) {
      if (!c.is_string()) fail(ErrorKind::Validation, "matrix category labels must be strings", "taxonomy");
      categories.push_back(c.get<std::string>());
    }
    if (categories.size() != kMatrixCategories) {
      fail(ErrorKind::Validation, "matrix_categories must list exactly 17 labels", "taxonomy");
    }
  } else {
    for (std::size_t i = 0; i < kMatrixCategories; ++i) categories.push_back("C" + std::to_string(i + 1));
  }

  std::map<std::string, ThreatPattern> entries;
  std::size_t position = 0;
  for (const auto& raw : doc.at("entries")) {
    ThreatPattern p = parse_entry(raw, position++);
    if (entries.count(p.id)) fail(ErrorKind::Validation, "duplicate taxonomy id", p.id);
    std::string id = p.id;
    entries.emplace(std::move(id), std::move(p));
  }

  const bool complete = entries.size() == TaxonomyRegistry::kCompleteSize;
  if (mode == LoadMode::Strict && !complete) {
    fail(ErrorKind::Validation,
         "a complete registry needs exactly 38 entries, found " + std::to_string(entries.size()), "taxonomy");
  }
  return TaxonomyRegistry(doc.at("version").get<std::string>(), std::move(categories), std::move(entries),
                          !complete);
}

TaxonomyRegistry load_taxonomy(const std::filesystem::path& path, LoadMode mode) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Parse, "cannot open taxonomy file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_taxonomy(buf.str(), mode);
}

FrameworkMapping merge(FrameworkMapping a, const FrameworkMapping& b) {
  a.owasp_llm.insert(b.owasp_llm.begin(), b.owasp_llm.end());
  a.owasp_agentic.insert(b.owasp_agentic.begin(), b.owasp_agentic.end());
  return a;
}

FrameworkMapping bridge_to_frameworks(const std::set<std::string>& ids, const TaxonomyRegistry& registry) {
  FrameworkMapping out;
  for (const auto& id : ids) {
    const ThreatPattern& p = registry.at(id);
    out.owasp_llm.insert(p.owasp_llm.begin(), p.owasp_llm.end());
    out.owasp_agentic.insert(p.owasp_agentic.begin(), p.owasp_agentic.end());
  }
  return out;
}

FlagSet combined_flags(const std::vector<std::string>& ids, const TaxonomyRegistry& registry) {
  FlagSet out;
  for (const auto& id : ids) out |= registry.at(id).flags;
  return out;
}

}  // namespace threathive
