#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "threathive/ingest.hpp"
#include "threathive/repair.hpp"
#include "threathive/scoring.hpp"
#include "threathive/taxonomy.hpp"

namespace threathive {

class CompletionClient;

enum class UpdPhase { ParasiticIngestion, PrivacyCollection, PrivacyDisclosure };
enum class UpdEdge { T2T, UPD };

std::string_view to_string(UpdPhase phase) noexcept;
std::string_view to_string(UpdEdge edge) noexcept;
std::optional<UpdPhase> parse_upd_phase(std::string_view text) noexcept;
std::optional<UpdEdge> parse_upd_edge(std::string_view text) noexcept;

struct UpdStep {
  std::string tool;
  UpdPhase phase = UpdPhase::ParasiticIngestion;

  friend bool operator==(const UpdStep&, const UpdStep&) = default;
};

// Parasitic tool chain. edges[i] labels the transition steps[i] -> steps[i+1].
struct UpdChain {
  std::vector<UpdStep> steps;
  std::vector<UpdEdge> edges;

  friend bool operator==(const UpdChain&, const UpdChain&) = default;
};

// At least two steps, edges = steps - 1, UPD only as the final edge,
// non-empty tool names.
bool is_valid(const UpdChain& chain) noexcept;

struct ThreatCard {
  std::string id;
  std::string title;
  std::string summary;
  std::vector<std::string> mcp_ids;  // first = primary
  WorkflowPhase workflow_phase = WorkflowPhase::CrossPhase;
  StrideCategory stride = StrideCategory::Tampering;
  RiskFactors factors;
  bool factors_from_model = false;
  FlagSet flags;
  ScoredRisk scored;                  // pure function of (factors, flags, scoring config)
  RiskLevel level = RiskLevel::Low;   // effective level after the Critical gate
  std::optional<RiskLevel> asserted_level;   // advisory, from the model
  std::optional<double> asserted_score;      // advisory, from the model
  std::set<std::string> owasp_llm;
  std::set<std::string> owasp_agentic;
  std::optional<UpdChain> upd_chain;
  std::set<std::string> source_item_ids;
  std::set<std::string> cve_ids;
  bool rce_or_exfil_or_critical_asset = false;
  std::vector<std::string> audit_notes;

  friend bool operator==(const ThreatCard&, const ThreatCard&) = default;
};

// Deterministic over (source items, title, mcp ids).
std::string threat_card_id(const std::set<std::string>& source_item_ids, std::string_view title,
                           const std::vector<std::string>& mcp_ids);

// Throws Error{Validation} when a card invariant does not hold: known
// non-empty mcp_ids, scored consistent with the scoring config, bridge-derived
// OWASP sets, valid UPD chain.
void validate(const ThreatCard& card, const TaxonomyRegistry& registry, const ScoringConfig& scoring = {});

struct AnalysisConfig {
  double relevance_threshold = 0.70;
  int batch_size = 5;
  std::string model_id;
  int max_output_tokens = 12000;
  int relevance_max_tokens = 256;
  int upd_max_tokens = 2048;
};

void validate(const AnalysisConfig& config);

// First decimal in the reply, if it lies in [0, 1].
std::optional<double> parse_relevance(std::string_view reply);

struct RelevanceResult {
  double score = 0.0;
  bool degraded = false;
};

// Sets item.relevance. Unparseable replies are retried once, then scored 0.0
// with the degraded flag. Throws Error{Precondition} for empty content.
RelevanceResult score_relevance(IntelItem& item, CompletionClient& gateway, const AnalysisConfig& config = {});

// Items with relevance strictly above theta, in input order. Throws
// Error{Validation} for an unscored item.
std::vector<IntelItem> filter_relevant(const std::vector<IntelItem>& items, double theta);

// Field order and mandatory markers of one threat record.
const RecordSchema& threat_record_schema();

struct BatchResult {
  std::vector<ThreatCard> cards;
  RepairStage stage = RepairStage::Strict;
  std::size_t dropped = 0;          // records rejected by repair or card validation
  bool failed = false;              // nothing recoverable; caller may re-queue
  std::vector<std::string> notes;
};

// The user prompt sent for a batch; exposed so fixtures can be sealed.
std::string threat_analysis_user_prompt(const std::vector<IntelItem>& items, const TaxonomyRegistry& registry);

// Converts one repaired record into a scored, bridged, gated card. Returns
// nullopt (with a note) for records that cannot be trusted.
std::optional<ThreatCard> card_from_record(const nlohmann::json& record, const std::vector<IntelItem>& items,
                                           const TaxonomyRegistry& registry, const ScoringConfig& scoring,
                                           std::vector<std::string>* notes = nullptr);

// Precondition: 1..batch_size items, each with relevance > threshold.
BatchResult analyze_batch(const std::vector<IntelItem>& items, const TaxonomyRegistry& registry,
                          CompletionClient& gateway, const ScoringConfig& scoring = {},
                          const AnalysisConfig& config = {});

// Recomputes scored from (factors, flags) and re-applies the Critical gate.
ThreatCard rescore(ThreatCard card, const ScoringConfig& scoring);

// Level re-derived from the final score; Critical survives only when the
// score exceeds the critical threshold and the impact flag is set.
ThreatCard enforce_consistency(ThreatCard card, const ScoringConfig& scoring = {});

struct UpdResult {
  std::optional<UpdChain> chain;
  bool degraded = false;
};

std::string upd_chain_user_prompt(const ThreatCard& card);

// Parses a chain reply; an empty step list means "no chain".
UpdResult parse_upd_chain(std::string_view reply);

UpdResult annotate_upd_chain(const ThreatCard& card, CompletionClient& gateway, const AnalysisConfig& config = {});

}  // namespace threathive
