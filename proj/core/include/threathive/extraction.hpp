#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "threathive/graph.hpp"

namespace threathive {

class CompletionClient;

struct ExtractedEntity {
  std::string label;
  NodeKind kind = NodeKind::ThreatEntity;
  std::string concept_tag;      // tag for concepts folded into ThreatEntity
  std::size_t offset = 0;   // byte offset of the first occurrence (rule hits only)
  std::size_t length = 0;

  friend bool operator==(const ExtractedEntity&, const ExtractedEntity&) = default;
};

struct ExtractionConfig {
  std::vector<std::string> technique_keywords = {
      "prompt injection", "tool poisoning", "rug pull",  "tool shadowing", "data exfiltration",
      "token theft",      "sandbox escape", "dns rebinding", "path traversal", "command injection",
  };
  std::string model_id;
  int max_output_tokens = 2048;
};

// CVE ids (CveIdentifier), CWE ids and technique keywords (ThreatEntity with
// concept Vulnerability / Technique), deduplicated within the document and
// ordered by first offset.
std::vector<ExtractedEntity> rule_extract(std::string_view text, const ExtractionConfig& config = {});

struct LlmExtraction {
  std::vector<ExtractedEntity> entities;
  bool degraded = false;
};

// Model-based extraction of Threat / Mitigation / Tool entities; Component,
// Technique, Asset and Vulnerability concepts become tagged ThreatEntity.
LlmExtraction llm_extract(std::string_view text, CompletionClient& gateway, const ExtractionConfig& config = {});

// Parses an entity list reply (shared by llm_extract and fixtures).
LlmExtraction parse_entities(std::string_view reply);

}  // namespace threathive
