#include "threathive/resolution.hpp"

#include <spdlog/spdlog.h>

#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"
#include "threathive/prompts.hpp"
#include "threathive/similarity.hpp"

namespace threathive {

std::string_view to_string(ResolutionDecision d) noexcept {
  switch (d) {
    case ResolutionDecision::ExactMatch: return "ExactMatch";
    case ResolutionDecision::JaccardMerge: return "JaccardMerge";
    case ResolutionDecision::LlmConfirmedMerge: return "LlmConfirmedMerge";
    case ResolutionDecision::NewEntity: return "NewEntity";
  }
  return "?";
}

std::string resolution_question(std::string_view new_label, std::string_view existing_label) {
  return "Are '" + std::string(new_label) + "' and '" + std::string(existing_label) +
         "' the same security concept? YES or NO.";
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  const auto words = detail::split_whitespace(reply);
  if (words.empty()) return std::nullopt;
  const std::string first = detail::fold_identifier(words.front());
  if (first == "yes") return true;
  if (first == "no") return false;
  return std::nullopt;
}

ResolutionOutcome resolve_entity(std::string_view label, NodeKind kind, const GraphSnapshot& graph,
                                 CompletionClient* gateway, const ResolutionConfig& config) {
  if (detail::trim(label).empty()) fail(ErrorKind::Precondition, "entity label is empty");

  ResolutionOutcome out;
  if (auto it = graph.label_index.find(label_key(kind, label)); it != graph.label_index.end()) {
    out.decision = ResolutionDecision::ExactMatch;
    out.matched_node = it->second;
    out.similarity = 1.0;
    return out;
  }

  const auto incoming = shingles(label);
  const GraphNode* best = nullptr;
  double best_j = -1.0;
  for (const auto* node : graph.nodes_of_kind(kind)) {  // creation order: first max wins ties
    double j = jaccard(incoming, shingles(node->canonical_label));
    for (const auto& alias : node->aliases) j = std::max(j, jaccard(incoming, shingles(alias)));
    if (j > best_j) {
      best_j = j;
      best = node;
    }
  }
  if (!best) return out;
  out.similarity = best_j;

  if (best_j >= config.merge_threshold) {
    out.decision = ResolutionDecision::JaccardMerge;
    out.matched_node = best->id;
    return out;
  }
  if (best_j < config.confirm_threshold) return out;

  if (!gateway) {
    out.degraded = true;
    return out;
  }
  CompletionRequest req;
  req.system_prompt = std::string(prompts::entity_resolution());
  req.user_prompt = resolution_question(detail::trim(label), best->canonical_label);
  req.model_id = config.model_id;
  req.max_output_tokens = config.max_output_tokens;
  try {
    const auto answer = parse_yes_no(gateway->complete(req));
    if (!answer) {
      out.degraded = true;
    } else if (*answer) {
      out.decision = ResolutionDecision::LlmConfirmedMerge;
      out.matched_node = best->id;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ReplayMismatch) throw;
    spdlog::warn("entity confirmation failed for '{}': {}", label, e.what());
    out.degraded = true;
  }
  return out;
}

}  // namespace threathive
