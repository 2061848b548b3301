#include "threathive/graph.hpp"

#include <deque>
#include <fstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "text_util.hpp"
#include "threathive/error.hpp"
#include "threathive/similarity.hpp"

namespace threathive {

using nlohmann::json;

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::IntelligenceItem: return "IntelligenceItem";
    case NodeKind::ThreatEntity: return "ThreatEntity";
    case NodeKind::McpThreatId: return "McpThreatId";
    case NodeKind::CveIdentifier: return "CveIdentifier";
    case NodeKind::Tool: return "Tool";
    case NodeKind::Mitigation: return "Mitigation";
  }
  return "?";
}

std::string_view to_string(EdgeKind kind) noexcept {
  switch (kind) {
    case EdgeKind::DESCRIBES: return "DESCRIBES";
    case EdgeKind::INSTANCES_OF: return "INSTANCES_OF";
    case EdgeKind::EXPLOITS: return "EXPLOITS";
    case EdgeKind::CHAINS_INTO: return "CHAINS_INTO";
    case EdgeKind::MITIGATED_BY: return "MITIGATED_BY";
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view text) noexcept {
  for (auto k : kNodeKinds) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::optional<EdgeKind> parse_edge_kind(std::string_view text) noexcept {
  for (auto k : kEdgeKinds) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

bool edge_allowed(EdgeKind kind, NodeKind src, NodeKind dst) noexcept {
  switch (kind) {
    case EdgeKind::DESCRIBES: return src == NodeKind::IntelligenceItem && dst == NodeKind::ThreatEntity;
    case EdgeKind::INSTANCES_OF: return src == NodeKind::ThreatEntity && dst == NodeKind::McpThreatId;
    case EdgeKind::EXPLOITS:
      return (src == NodeKind::ThreatEntity || src == NodeKind::Tool) && dst == NodeKind::CveIdentifier;
    case EdgeKind::CHAINS_INTO:
      return (src == NodeKind::Tool || src == NodeKind::ThreatEntity) &&
             (dst == NodeKind::Tool || dst == NodeKind::McpThreatId);
    case EdgeKind::MITIGATED_BY: return src != NodeKind::Mitigation && dst == NodeKind::Mitigation;
  }
  return false;
}

std::string label_key(NodeKind kind, std::string_view label) {
  return std::string(to_string(kind)) + '\x1f' + canonicalize_label(label);
}

const GraphNode* GraphSnapshot::find(std::string_view id) const {
  auto it = nodes.find(std::string(id));
  return it == nodes.end() ? nullptr : &it->second;
}

std::vector<const GraphNode*> GraphSnapshot::nodes_of_kind(NodeKind kind) const {
  std::vector<const GraphNode*> out;
  for (const auto& [id, n] : nodes) {
    if (n.kind == kind) out.push_back(&n);
  }
  std::sort(out.begin(), out.end(), [](const GraphNode* a, const GraphNode* b) { return a->seq < b->seq; });
  return out;
}

bool GraphWriter::add_node(GraphNode node) {
  if (node.id.empty()) fail(ErrorKind::Validation, "node id is empty");
  if (detail::trim(node.canonical_label).empty()) fail(ErrorKind::Validation, "node label is empty", node.id);
  if (working_.nodes.count(node.id)) return false;
  node.aliases.erase(node.canonical_label);
  node.seq = working_.next_seq++;
  working_.label_index.try_emplace(label_key(node.kind, node.canonical_label), node.id);
  for (const auto& a : node.aliases) working_.label_index.try_emplace(label_key(node.kind, a), node.id);
  log_.push_back(json{{"op", "add_node"},
                      {"id", node.id},
                      {"kind", to_string(node.kind)},
                      {"label", node.canonical_label},
                      {"aliases", node.aliases},
                      {"concept", node.concept_tag}}
                     .dump());
  const std::string id = node.id;
  working_.nodes.emplace(id, std::move(node));
  return true;
}

bool GraphWriter::add_edge(const GraphEdge& edge) {
  if (edge.src == edge.dst) fail(ErrorKind::Validation, "self loop rejected", edge.src);
  const auto* s = working_.find(edge.src);
  const auto* d = working_.find(edge.dst);
  if (!s || !d) fail(ErrorKind::Validation, "edge endpoint does not exist", s ? edge.dst : edge.src);
  if (!edge_allowed(edge.kind, s->kind, d->kind)) {
    fail(ErrorKind::Validation,
         std::string(to_string(edge.kind)) + " not allowed from " + std::string(to_string(s->kind)) + " to " +
             std::string(to_string(d->kind)),
         edge.src + "->" + edge.dst);
  }
  if (!working_.edge_set.insert(edge).second) return false;
  working_.out_edges[edge.src].push_back(working_.edges.size());
  working_.edges.push_back(edge);
  log_.push_back(json{{"op", "add_edge"}, {"kind", to_string(edge.kind)}, {"src", edge.src}, {"dst", edge.dst}}.dump());
  return true;
}

bool GraphWriter::add_alias(const std::string& id, const std::string& alias) {
  auto it = working_.nodes.find(id);
  if (it == working_.nodes.end()) fail(ErrorKind::Lookup, "unknown node", id);
  auto& node = it->second;
  if (detail::trim(alias).empty() || alias == node.canonical_label || node.aliases.count(alias)) return false;
  node.aliases.insert(alias);
  working_.label_index.try_emplace(label_key(node.kind, alias), id);
  log_.push_back(json{{"op", "add_alias"}, {"id", id}, {"alias", alias}}.dump());
  return true;
}

GraphStore::GraphStore() : current_(std::make_shared<const GraphSnapshot>()) {}

GraphStore::GraphStore(std::filesystem::path log_path) : GraphStore() {
  if (std::filesystem::exists(log_path)) replay(log_path);
  log_path_ = std::move(log_path);
}

void GraphStore::replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Storage, "cannot read graph log", path.string());
  GraphWriter w(GraphSnapshot{});
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    try {
      const auto op = json::parse(line);
      const std::string kind = op.at("op");
      if (kind == "add_node") {
        GraphNode n;
        n.id = op.at("id");
        const auto k = parse_node_kind(op.at("kind").get<std::string>());
        if (!k) fail(ErrorKind::Parse, "unknown node kind");
        n.kind = *k;
        n.canonical_label = op.at("label");
        n.aliases = op.value("aliases", std::set<std::string>{});
        n.concept_tag = op.value("concept", "");
        w.add_node(std::move(n));
      } else if (kind == "add_edge") {
        const auto k = parse_edge_kind(op.at("kind").get<std::string>());
        if (!k) fail(ErrorKind::Parse, "unknown edge kind");
        w.add_edge({*k, op.at("src"), op.at("dst")});
      } else if (kind == "add_alias") {
        w.add_alias(op.at("id"), op.at("alias"));
      } else {
        fail(ErrorKind::Parse, "unknown op " + kind);
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, "graph log line " + std::to_string(lineno) + ": " + e.what(), path.string());
    } catch (const Error& e) {
      fail(ErrorKind::Parse, "graph log line " + std::to_string(lineno) + ": " + e.what(), path.string());
    }
  }
  std::lock_guard lock(publish_mutex_);
  current_ = std::make_shared<const GraphSnapshot>(std::move(w.working_));
}

std::shared_ptr<const GraphSnapshot> GraphStore::snapshot() const {
  std::lock_guard lock(publish_mutex_);
  return current_;
}

void GraphStore::write(const std::function<void(GraphWriter&)>& fn) {
  std::lock_guard writer(write_mutex_);
  GraphWriter w(*snapshot());
  fn(w);
  if (w.log_.empty()) return;
  if (log_path_) {
    std::ofstream out(*log_path_, std::ios::app);
    for (const auto& line : w.log_) out << line << '\n';
    out.flush();
    if (!out) fail(ErrorKind::Storage, "cannot append to graph log", log_path_->string());
  }
  auto next = std::make_shared<const GraphSnapshot>(std::move(w.working_));
  std::lock_guard lock(publish_mutex_);
  current_ = std::move(next);
}

bool GraphStore::add_node(GraphNode node) {
  bool added = false;
  write([&](GraphWriter& w) { added = w.add_node(std::move(node)); });
  return added;
}

bool GraphStore::add_edge(const GraphEdge& edge) {
  bool added = false;
  write([&](GraphWriter& w) { added = w.add_edge(edge); });
  return added;
}

bool GraphStore::add_alias(const std::string& id, const std::string& alias) {
  bool added = false;
  write([&](GraphWriter& w) { added = w.add_alias(id, alias); });
  return added;
}

std::size_t GraphStore::node_count() const { return snapshot()->nodes.size(); }
std::size_t GraphStore::edge_count() const { return snapshot()->edges.size(); }

std::set<std::string> reachable_tools(const GraphSnapshot& graph, std::string_view entry) {
  if (!graph.find(entry)) fail(ErrorKind::Lookup, "unknown entry node", std::string(entry));
  std::set<std::string> visited{std::string(entry)};
  std::deque<std::string> queue{std::string(entry)};
  while (!queue.empty()) {
    const std::string id = std::move(queue.front());
    queue.pop_front();
    auto it = graph.out_edges.find(id);
    if (it == graph.out_edges.end()) continue;
    for (auto idx : it->second) {
      const auto& e = graph.edges[idx];
      if (e.kind == EdgeKind::CHAINS_INTO && visited.insert(e.dst).second) queue.push_back(e.dst);
    }
  }
  visited.erase(std::string(entry));
  return visited;
}

std::vector<GraphEdge> constraint_violations(const GraphSnapshot& graph) {
  std::vector<GraphEdge> out;
  for (const auto& e : graph.edges) {
    const auto* s = graph.find(e.src);
    const auto* d = graph.find(e.dst);
    if (!s || !d || e.src == e.dst || !edge_allowed(e.kind, s->kind, d->kind)) out.push_back(e);
  }
  return out;
}

namespace {

std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void export_csv(const GraphSnapshot& graph, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::ofstream nodes(directory / "nodes.csv");
  std::ofstream edges(directory / "edges.csv");
  if (!nodes || !edges) fail(ErrorKind::Storage, "cannot write export files", directory.string());
  nodes << "id:ID,:LABEL,label,aliases,concept\n";
  std::vector<const GraphNode*> ordered;
  for (const auto& [id, n] : graph.nodes) ordered.push_back(&n);
  std::sort(ordered.begin(), ordered.end(), [](const GraphNode* a, const GraphNode* b) { return a->seq < b->seq; });
  for (const auto* n : ordered) {
    nodes << csv_field(n->id) << ',' << to_string(n->kind) << ',' << csv_field(n->canonical_label) << ','
          << csv_field(detail::join({n->aliases.begin(), n->aliases.end()}, ";")) << ',' << csv_field(n->concept_tag)
          << '\n';
  }
  edges << ":START_ID,:END_ID,:TYPE\n";
  for (const auto& e : graph.edges) edges << csv_field(e.src) << ',' << csv_field(e.dst) << ',' << to_string(e.kind) << '\n';
  if (!nodes || !edges) fail(ErrorKind::Storage, "export write failed", directory.string());
}

}  // namespace threathive
