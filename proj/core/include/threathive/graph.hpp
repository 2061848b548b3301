#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace threathive {

enum class NodeKind { IntelligenceItem, ThreatEntity, McpThreatId, CveIdentifier, Tool, Mitigation };
enum class EdgeKind { DESCRIBES, INSTANCES_OF, EXPLOITS, CHAINS_INTO, MITIGATED_BY };

inline constexpr NodeKind kNodeKinds[] = {NodeKind::IntelligenceItem, NodeKind::ThreatEntity, NodeKind::McpThreatId,
                                          NodeKind::CveIdentifier,    NodeKind::Tool,         NodeKind::Mitigation};
inline constexpr EdgeKind kEdgeKinds[] = {EdgeKind::DESCRIBES, EdgeKind::INSTANCES_OF, EdgeKind::EXPLOITS,
                                          EdgeKind::CHAINS_INTO, EdgeKind::MITIGATED_BY};

std::string_view to_string(NodeKind kind) noexcept;
std::string_view to_string(EdgeKind kind) noexcept;
std::optional<NodeKind> parse_node_kind(std::string_view text) noexcept;
std::optional<EdgeKind> parse_edge_kind(std::string_view text) noexcept;

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::ThreatEntity;
  std::string canonical_label;
  std::set<std::string> aliases;
  std::string concept_tag;   // Component / Technique / Asset / Vulnerability tag on ThreatEntity nodes
  std::uint64_t seq = 0; // creation order, assigned by the store

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
  EdgeKind kind = EdgeKind::DESCRIBES;
  std::string src;
  std::string dst;

  friend auto operator<=>(const GraphEdge&, const GraphEdge&) = default;
};

// Endpoint-kind constraints:
//   DESCRIBES     IntelligenceItem -> ThreatEntity
//   INSTANCES_OF  ThreatEntity -> McpThreatId
//   EXPLOITS      ThreatEntity | Tool -> CveIdentifier
//   CHAINS_INTO   Tool | ThreatEntity -> Tool | McpThreatId
//   MITIGATED_BY  any but Mitigation -> Mitigation
bool edge_allowed(EdgeKind kind, NodeKind src, NodeKind dst) noexcept;

// Index key used by tier-1 resolution: kind + canonicalized label.
std::string label_key(NodeKind kind, std::string_view label);

// Immutable view published by the store.
struct GraphSnapshot {
  std::map<std::string, GraphNode> nodes;
  std::vector<GraphEdge> edges;  // insertion order
  std::set<GraphEdge> edge_set;
  std::unordered_map<std::string, std::vector<std::size_t>> out_edges;  // node id -> indices into edges
  std::unordered_map<std::string, std::string> label_index;             // label_key -> node id
  std::uint64_t next_seq = 0;

  const GraphNode* find(std::string_view id) const;
  // Nodes of one kind in creation order.
  std::vector<const GraphNode*> nodes_of_kind(NodeKind kind) const;
};

// Accumulates one atomic batch of mutations against a private copy.
class GraphWriter {
 public:
  explicit GraphWriter(GraphSnapshot working) : working_(std::move(working)) {}

  const GraphSnapshot& view() const noexcept { return working_; }

  // false when the id already exists (the stored node is left untouched).
  bool add_node(GraphNode node);
  // false for a duplicate edge. Throws Error{Validation} for self loops,
  // unknown endpoints or an endpoint-kind violation.
  bool add_edge(const GraphEdge& edge);
  // false when the alias is already known or equals the canonical label.
  bool add_alias(const std::string& id, const std::string& alias);

 private:
  friend class GraphStore;
  GraphSnapshot working_;
  std::vector<std::string> log_;
};

// Single writer, many readers. Mutations go through write(), which commits
// atomically: the change log is appended and a new snapshot published, or
// nothing happens when the callback throws.
class GraphStore {
 public:
  GraphStore();
  // Replays an existing change log and appends to it from then on.
  explicit GraphStore(std::filesystem::path log_path);

  GraphStore(const GraphStore&) = delete;
  GraphStore& operator=(const GraphStore&) = delete;

  std::shared_ptr<const GraphSnapshot> snapshot() const;

  void write(const std::function<void(GraphWriter&)>& fn);

  bool add_node(GraphNode node);
  bool add_edge(const GraphEdge& edge);
  bool add_alias(const std::string& id, const std::string& alias);

  std::size_t node_count() const;
  std::size_t edge_count() const;
  const std::optional<std::filesystem::path>& log_path() const noexcept { return log_path_; }

 private:
  void replay(const std::filesystem::path& path);

  std::mutex write_mutex_;
  mutable std::mutex publish_mutex_;
  std::shared_ptr<const GraphSnapshot> current_;
  std::optional<std::filesystem::path> log_path_;
};

// Every node reachable from entry along CHAINS_INTO edges, entry excluded.
// Throws Error{Lookup} for an unknown entry.
std::set<std::string> reachable_tools(const GraphSnapshot& graph, std::string_view entry);

// Full scan of the edge kind constraints; returns offending edges.
std::vector<GraphEdge> constraint_violations(const GraphSnapshot& graph);

// Bulk-import CSV pair: nodes.csv (id:ID,:LABEL,label,aliases,concept) and
// edges.csv (:START_ID,:END_ID,:TYPE).
void export_csv(const GraphSnapshot& graph, const std::filesystem::path& directory);

}  // namespace threathive
