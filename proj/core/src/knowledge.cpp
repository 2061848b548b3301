#include "threathive/knowledge.hpp"

#include <spdlog/spdlog.h>

#include "hashing.hpp"
#include "threathive/error.hpp"
#include "threathive/similarity.hpp"

namespace threathive {

GraphDelta& GraphDelta::operator+=(const GraphDelta& other) {
  nodes_added += other.nodes_added;
  edges_added += other.edges_added;
  rejected.insert(rejected.end(), other.rejected.begin(), other.rejected.end());
  degraded = degraded || other.degraded;
  return *this;
}

namespace {

struct Upserter {
  GraphWriter& w;
  CompletionClient* gateway;
  const UpsertOptions& options;
  GraphDelta delta;

  void node(GraphNode n) {
    if (w.add_node(std::move(n))) ++delta.nodes_added;
  }

  void edge(EdgeKind kind, const std::string& src, const std::string& dst) {
    if (src == dst) return;
    try {
      if (w.add_edge({kind, src, dst})) ++delta.edges_added;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Validation) throw;
      spdlog::warn("edge rejected: {}", e.what());
      delta.rejected.push_back(std::string(to_string(kind)) + " " + src + "->" + dst + ": " + e.what());
    }
  }

  // Resolves a label against same-kind nodes and creates a node when nothing
  // matches. Returns the node id.
  std::string entity(const std::string& label, NodeKind kind, std::string_view prefix, const std::string& concept_tag) {
    const auto outcome = resolve_entity(label, kind, w.view(), gateway, options.resolution);
    delta.degraded = delta.degraded || outcome.degraded;
    if (outcome.matched_node) {
      if (outcome.decision != ResolutionDecision::ExactMatch) w.add_alias(*outcome.matched_node, label);
      return *outcome.matched_node;
    }
    std::string id = std::string(prefix) + detail::sha256_hex(canonicalize_label(label)).substr(0, 12);
    GraphNode n;
    n.id = id;
    n.kind = kind;
    n.canonical_label = label;
    n.concept_tag = concept_tag;
    node(std::move(n));
    return id;
  }
};

}  // namespace

GraphDelta upsert_card(GraphStore& store, const ThreatCard& card, const std::vector<ExtractedEntity>& entities,
                       CompletionClient* gateway, const UpsertOptions& options) {
  if (card.mcp_ids.empty()) fail(ErrorKind::Precondition, "card has no taxonomy ids", card.id);
  GraphDelta delta;
  store.write([&](GraphWriter& w) {
    Upserter u{w, gateway, options, {}};

    const std::string threat = u.entity(card.title, NodeKind::ThreatEntity, "threat:", "");

    std::vector<std::string> items;
    for (const auto& item_id : card.source_item_ids) {
      const std::string id = "item:" + item_id;
      auto title = options.item_titles.find(item_id);
      u.node({id, NodeKind::IntelligenceItem, title == options.item_titles.end() ? item_id : title->second, {}, "", 0});
      u.edge(EdgeKind::DESCRIBES, id, threat);
      items.push_back(id);
    }

    for (std::size_t i = 0; i < card.mcp_ids.size(); ++i) {
      const std::string id = "mcp:" + card.mcp_ids[i];
      u.node({id, NodeKind::McpThreatId, card.mcp_ids[i], {}, "", 0});
      const bool chained = i > 0 && card.upd_chain.has_value();
      u.edge(chained ? EdgeKind::CHAINS_INTO : EdgeKind::INSTANCES_OF, threat, id);
    }

    std::set<std::string> cves = card.cve_ids;
    for (const auto& e : entities) {
      if (e.kind == NodeKind::CveIdentifier) cves.insert(e.label);
    }
    for (const auto& cve : cves) {
      const std::string id = "cve:" + cve;
      u.node({id, NodeKind::CveIdentifier, cve, {}, "", 0});
      u.edge(EdgeKind::EXPLOITS, threat, id);
    }

    for (const auto& e : entities) {
      switch (e.kind) {
        case NodeKind::Mitigation:
          u.edge(EdgeKind::MITIGATED_BY, threat, u.entity(e.label, NodeKind::Mitigation, "mitigation:", ""));
          break;
        case NodeKind::ThreatEntity: {
          const auto id = u.entity(e.label, NodeKind::ThreatEntity, "threat:", e.concept_tag);
          for (const auto& item : items) u.edge(EdgeKind::DESCRIBES, item, id);
          break;
        }
        case NodeKind::Tool:
          if (options.materialize_tool_chain) {
            u.edge(EdgeKind::CHAINS_INTO, threat, u.entity(e.label, NodeKind::Tool, "tool:", ""));
          }
          break;
        default: break;
      }
    }

    if (options.materialize_tool_chain && card.upd_chain) {
      std::vector<std::string> tools;
      for (const auto& step : card.upd_chain->steps) tools.push_back(u.entity(step.tool, NodeKind::Tool, "tool:", ""));
      if (!tools.empty()) u.edge(EdgeKind::CHAINS_INTO, threat, tools.front());
      for (std::size_t i = 0; i + 1 < tools.size(); ++i) u.edge(EdgeKind::CHAINS_INTO, tools[i], tools[i + 1]);
    }
    delta = std::move(u.delta);
  });
  return delta;
}

}  // namespace threathive
