#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "threathive/analysis.hpp"

namespace threathive {

class CompletionClient;

enum class Priority { P0, P1, P2 };  // P0 most urgent
enum class Effort { Low, Medium, High };

std::string_view to_string(Priority p) noexcept;
std::string_view to_string(Effort e) noexcept;
std::optional<Priority> parse_priority(std::string_view text) noexcept;
std::optional<Effort> parse_effort(std::string_view text) noexcept;

struct Mitigation {
  std::string text;
  Priority priority = Priority::P2;
  Effort effort = Effort::Medium;

  friend bool operator==(const Mitigation&, const Mitigation&) = default;
};

struct PlanEntry {
  std::string threat_card_id;
  double final_score = 0.0;
  std::vector<std::string> detection_methods;
  std::vector<Mitigation> mitigations;
  std::vector<std::string> framework_refs;
  bool unavailable = false;  // placeholder after repeated planning failure

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

struct RiskPlan {
  std::string id;
  std::vector<PlanEntry> entries;  // final score descending, ties by card id
  bool degraded = false;
  std::vector<std::string> notes;

  friend bool operator==(const RiskPlan&, const RiskPlan&) = default;
};

struct PlannerConfig {
  int batch_size = 5;
  double dedup_threshold = 0.75;
  std::string model_id;
  int max_output_tokens = 12000;
  bool enabled_in_full_run = false;
};

void validate(const PlannerConfig& config);

std::string plan_id(const std::vector<std::string>& card_ids);

// Sort key shared by every plan stage.
void order_entries(std::vector<PlanEntry>& entries);

// Throws Error{Validation} when the ordering or card references are broken.
void validate(const RiskPlan& plan, const std::vector<ThreatCard>& cards);

struct PartialPlan {
  std::vector<PlanEntry> entries;
  bool degraded = false;
  std::vector<std::string> notes;
};

std::string plan_batch_user_prompt(const std::vector<ThreatCard>& cards);

// One entry per card. Unusable output is retried once; cards still missing
// get a placeholder entry flagged unavailable.
PartialPlan plan_batch(const std::vector<ThreatCard>& cards, CompletionClient& gateway,
                       const PlannerConfig& config = {});

// Merges entries per card, collapses near-duplicate mitigations (Jaccard at
// or above threshold; first text, highest priority) and exact-duplicate
// detection methods, then orders by score.
std::vector<PlanEntry> aggregate(std::vector<PlanEntry> partials, double threshold = 0.75);

// Prose-only rewrite. Any change to the entry set, order, mitigation counts,
// priorities or efforts reverts to the input with the degraded flag.
RiskPlan refine(std::vector<PlanEntry> merged, CompletionClient& gateway, const PlannerConfig& config = {});

// Batch, aggregate, refine.
RiskPlan build_plan(const std::vector<ThreatCard>& cards, CompletionClient& gateway, const PlannerConfig& config = {});

}  // namespace threathive
