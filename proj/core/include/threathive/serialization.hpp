#pragma once

#include <nlohmann/json.hpp>

#include "threathive/analysis.hpp"
#include "threathive/graph.hpp"
#include "threathive/ingest.hpp"
#include "threathive/planner.hpp"
#include "threathive/scoring.hpp"
#include "threathive/storage.hpp"

// nlohmann adapters for the domain types. from_json throws Error{Parse} on
// unknown enum spellings and nlohmann exceptions on missing fields.
namespace threathive {

void to_json(nlohmann::json& j, const RiskFactors& f);
void from_json(const nlohmann::json& j, RiskFactors& f);
void to_json(nlohmann::json& j, const ScoredRisk& s);
void from_json(const nlohmann::json& j, ScoredRisk& s);
void to_json(nlohmann::json& j, const ScoringConfig& c);
void from_json(const nlohmann::json& j, ScoringConfig& c);
void to_json(nlohmann::json& j, FlagSet flags);
void from_json(const nlohmann::json& j, FlagSet& flags);

void to_json(nlohmann::json& j, const IntelItem& item);
void from_json(const nlohmann::json& j, IntelItem& item);
void to_json(nlohmann::json& j, const SearchQuery& q);

void to_json(nlohmann::json& j, const UpdChain& chain);
void from_json(const nlohmann::json& j, UpdChain& chain);
void to_json(nlohmann::json& j, const ThreatCard& card);
void from_json(const nlohmann::json& j, ThreatCard& card);

void to_json(nlohmann::json& j, const GraphNode& node);
void to_json(nlohmann::json& j, const GraphEdge& edge);

void to_json(nlohmann::json& j, const Mitigation& m);
void from_json(const nlohmann::json& j, Mitigation& m);
void to_json(nlohmann::json& j, const PlanEntry& e);
void from_json(const nlohmann::json& j, PlanEntry& e);
void to_json(nlohmann::json& j, const RiskPlan& plan);
void from_json(const nlohmann::json& j, RiskPlan& plan);

void to_json(nlohmann::json& j, const RunCounts& c);
void from_json(const nlohmann::json& j, RunCounts& c);
void to_json(nlohmann::json& j, const RunRecord& run);
void from_json(const nlohmann::json& j, RunRecord& run);

}  // namespace threathive
