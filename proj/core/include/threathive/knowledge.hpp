#pragma once

#include <map>
#include <string>
#include <vector>

#include "threathive/analysis.hpp"
#include "threathive/extraction.hpp"
#include "threathive/graph.hpp"
#include "threathive/resolution.hpp"

namespace threathive {

struct GraphDelta {
  int nodes_added = 0;
  int edges_added = 0;
  std::vector<std::string> rejected;  // edges refused by the kind constraints
  bool degraded = false;              // some resolution ran without confirmation

  GraphDelta& operator+=(const GraphDelta& other);
  friend bool operator==(const GraphDelta& a, const GraphDelta& b) {
    return a.nodes_added == b.nodes_added && a.edges_added == b.edges_added;
  }
};

struct UpsertOptions {
  std::map<std::string, std::string> item_titles;  // labels for IntelligenceItem nodes
  bool materialize_tool_chain = false;             // Tool nodes for UPD steps
  ResolutionConfig resolution;
};

// Writes one card and its resolved entities in a single atomic batch:
//   item -DESCRIBES-> threat -INSTANCES_OF-> primary id
//   threat -CHAINS_INTO-> secondary ids when the card has a UPD chain,
//   otherwise INSTANCES_OF; EXPLOITS to CVEs; MITIGATED_BY to mitigations.
// Re-upserting the same card adds nothing.
GraphDelta upsert_card(GraphStore& store, const ThreatCard& card, const std::vector<ExtractedEntity>& entities,
                       CompletionClient* gateway, const UpsertOptions& options = {});

}  // namespace threathive
