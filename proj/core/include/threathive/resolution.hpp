#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "threathive/graph.hpp"

namespace threathive {

class CompletionClient;

enum class ResolutionDecision { ExactMatch, JaccardMerge, LlmConfirmedMerge, NewEntity };

std::string_view to_string(ResolutionDecision d) noexcept;

struct ResolutionOutcome {
  ResolutionDecision decision = ResolutionDecision::NewEntity;
  std::optional<std::string> matched_node;
  std::optional<double> similarity;  // max J against same-kind candidates, when any exist
  bool degraded = false;             // tier-3 confirmation was unavailable
};

struct ResolutionConfig {
  double merge_threshold = 0.75;
  double confirm_threshold = 0.50;
  std::string model_id;
  int max_output_tokens = 16;
};

// The tier-3 confirmation question.
std::string resolution_question(std::string_view new_label, std::string_view existing_label);

// Reads a YES / NO reply; nullopt for anything else.
std::optional<bool> parse_yes_no(std::string_view reply);

// Tier 1: case-insensitive exact match on labels and aliases of same-kind
// nodes. Tier 2: best Jaccard candidate at or above merge_threshold (ties go
// to the earliest node). Tier 3: a candidate in [confirm, merge) is merged
// only on a YES from the gateway. Pure with respect to the graph; the caller
// records aliases. A null gateway behaves like a failing one.
ResolutionOutcome resolve_entity(std::string_view label, NodeKind kind, const GraphSnapshot& graph,
                                 CompletionClient* gateway, const ResolutionConfig& config = {});

}  // namespace threathive
