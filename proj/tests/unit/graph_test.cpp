#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "test_support.hpp"
#include "threathive/error.hpp"
#include "threathive/graph.hpp"

using namespace threathive;

namespace {

GraphNode n(std::string id, NodeKind kind, std::string label = {}) {
  GraphNode g;
  g.id = std::move(id);
  g.kind = kind;
  g.canonical_label = label.empty() ? g.id : std::move(label);
  return g;
}

// transitive closure by repeated squaring of a boolean matrix
std::set<std::string> closure_oracle(const std::vector<std::string>& ids,
                                     const std::vector<std::pair<std::size_t, std::size_t>>& chains, std::size_t entry) {
  const std::size_t v = ids.size();
  std::vector<std::vector<bool>> r(v, std::vector<bool>(v, false));
  for (auto [a, b] : chains) r[a][b] = true;
  for (std::size_t k = 0; k < v; ++k)
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  std::set<std::string> out;
  for (std::size_t j = 0; j < v; ++j)
    if (r[entry][j] && j != entry) out.insert(ids[j]);
  return out;
}

}  // namespace

TEST(Graph, KindConstraintTable) {
  using K = NodeKind;
  EXPECT_TRUE(edge_allowed(EdgeKind::DESCRIBES, K::IntelligenceItem, K::ThreatEntity));
  EXPECT_FALSE(edge_allowed(EdgeKind::DESCRIBES, K::ThreatEntity, K::IntelligenceItem));
  EXPECT_TRUE(edge_allowed(EdgeKind::INSTANCES_OF, K::ThreatEntity, K::McpThreatId));
  EXPECT_FALSE(edge_allowed(EdgeKind::INSTANCES_OF, K::Tool, K::McpThreatId));
  EXPECT_TRUE(edge_allowed(EdgeKind::EXPLOITS, K::Tool, K::CveIdentifier));
  EXPECT_TRUE(edge_allowed(EdgeKind::EXPLOITS, K::ThreatEntity, K::CveIdentifier));
  EXPECT_FALSE(edge_allowed(EdgeKind::EXPLOITS, K::ThreatEntity, K::Tool));
  EXPECT_TRUE(edge_allowed(EdgeKind::CHAINS_INTO, K::Tool, K::Tool));
  EXPECT_TRUE(edge_allowed(EdgeKind::CHAINS_INTO, K::ThreatEntity, K::McpThreatId));
  EXPECT_FALSE(edge_allowed(EdgeKind::CHAINS_INTO, K::CveIdentifier, K::Tool));
  EXPECT_TRUE(edge_allowed(EdgeKind::MITIGATED_BY, K::CveIdentifier, K::Mitigation));
  EXPECT_FALSE(edge_allowed(EdgeKind::MITIGATED_BY, K::Mitigation, K::Mitigation));
}

TEST(Graph, WriterRejectsBadEdges) {
  GraphStore g;
  g.add_node(n("t", NodeKind::ThreatEntity));
  g.add_node(n("m", NodeKind::McpThreatId));
  EXPECT_THROW(g.add_edge({EdgeKind::INSTANCES_OF, "m", "t"}), Error);
  EXPECT_THROW(g.add_edge({EdgeKind::INSTANCES_OF, "t", "missing"}), Error);
  EXPECT_THROW(g.add_edge({EdgeKind::CHAINS_INTO, "t", "t"}), Error);
  EXPECT_TRUE(g.add_edge({EdgeKind::INSTANCES_OF, "t", "m"}));
  EXPECT_FALSE(g.add_edge({EdgeKind::INSTANCES_OF, "t", "m"}));
  EXPECT_EQ(g.edge_count(), 1u);
  EXPECT_TRUE(constraint_violations(*g.snapshot()).empty());
}

TEST(Graph, NodesAreIdempotent) {
  GraphStore g;
  EXPECT_TRUE(g.add_node(n("a", NodeKind::Tool, "reader")));
  EXPECT_FALSE(g.add_node(n("a", NodeKind::Tool, "other")));
  EXPECT_EQ(g.snapshot()->find("a")->canonical_label, "reader");
  EXPECT_TRUE(g.add_alias("a", "Reader Tool"));
  EXPECT_FALSE(g.add_alias("a", "Reader Tool"));
  EXPECT_FALSE(g.add_alias("a", "reader"));
  EXPECT_THROW(g.add_alias("zz", "x"), Error);
  EXPECT_EQ(g.snapshot()->label_index.at(label_key(NodeKind::Tool, "reader tool")), "a");
}

TEST(Graph, WriteIsAtomic) {
  GraphStore g;
  g.add_node(n("t", NodeKind::ThreatEntity));
  auto before = g.snapshot();
  EXPECT_THROW(g.write([](GraphWriter& w) {
    w.add_node(n("x", NodeKind::Tool));
    w.add_edge({EdgeKind::DESCRIBES, "x", "t"});  // wrong kinds
  }),
               Error);
  EXPECT_EQ(g.node_count(), 1u);
  EXPECT_EQ(g.snapshot(), before);
}

TEST(Graph, SnapshotsAreStable) {
  GraphStore g;
  g.add_node(n("a", NodeKind::Tool));
  auto old = g.snapshot();
  g.add_node(n("b", NodeKind::Tool));
  EXPECT_EQ(old->nodes.size(), 1u);
  EXPECT_EQ(g.snapshot()->nodes.size(), 2u);
  EXPECT_LT(g.snapshot()->find("a")->seq, g.snapshot()->find("b")->seq);
}

TEST(Graph, LogReplayRestoresState) {
  const auto dir = th_test::scratch_dir("graphlog");
  const auto log = dir / "graph.log.jsonl";
  {
    GraphStore g(log);
    g.write([](GraphWriter& w) {
      w.add_node(n("i", NodeKind::IntelligenceItem, "article"));
      w.add_node(n("t", NodeKind::ThreatEntity, "prompt injection"));
      w.add_edge({EdgeKind::DESCRIBES, "i", "t"});
      w.add_alias("t", "prompt injections");
    });
    g.add_node(n("c", NodeKind::CveIdentifier, "CVE-2025-6514"));
    g.add_edge({EdgeKind::EXPLOITS, "t", "c"});
  }
  GraphStore again(log);
  auto s = again.snapshot();
  EXPECT_EQ(s->nodes.size(), 3u);
  EXPECT_EQ(s->edges.size(), 2u);
  EXPECT_EQ(s->find("t")->aliases, std::set<std::string>{"prompt injections"});
  EXPECT_EQ(s->edges[0], (GraphEdge{EdgeKind::DESCRIBES, "i", "t"}));
  // appending continues the same log
  again.add_node(n("m", NodeKind::Mitigation, "sandbox"));
  GraphStore third(log);
  EXPECT_EQ(third.node_count(), 4u);
}

TEST(Graph, CorruptLogIsRejected) {
  const auto dir = th_test::scratch_dir("graphbad");
  std::ofstream(dir / "g.jsonl") << "{\"op\":\"add_edge\",\"kind\":\"DESCRIBES\",\"src\":\"a\",\"dst\":\"b\"}\n";
  EXPECT_THROW(GraphStore(dir / "g.jsonl"), Error);
}

TEST(Graph, CsvExport) {
  GraphStore g;
  g.add_node(n("t", NodeKind::ThreatEntity, "quote \"x\", comma"));
  g.add_node(n("m", NodeKind::McpThreatId, "MCP-19"));
  g.add_edge({EdgeKind::INSTANCES_OF, "t", "m"});
  const auto dir = th_test::scratch_dir("csv");
  export_csv(*g.snapshot(), dir);
  const auto nodes = th_test::read_file(dir / "nodes.csv");
  const auto edges = th_test::read_file(dir / "edges.csv");
  EXPECT_EQ(nodes, "id:ID,:LABEL,label,aliases,concept\nt,ThreatEntity,\"quote \"\"x\"\", comma\",,\nm,McpThreatId,MCP-19,,\n");
  EXPECT_EQ(edges, ":START_ID,:END_ID,:TYPE\nt,m,INSTANCES_OF\n");
}

TEST(Graph, ReachabilityUnknownEntry) {
  GraphStore g;
  EXPECT_THROW(reachable_tools(*g.snapshot(), "nope"), Error);
}

TEST(Graph, ReachabilityMatchesClosureOnRandomDigraphs) {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t v = 1 + rng() % 50;
    std::vector<std::string> ids;
    GraphStore g;
    for (std::size_t i = 0; i < v; ++i) {
      ids.push_back("tool" + std::to_string(i));
      g.add_node(n(ids.back(), NodeKind::Tool));
    }
    g.add_node(n("cve", NodeKind::CveIdentifier));
    std::vector<std::pair<std::size_t, std::size_t>> chains;
    const double density = std::uniform_real_distribution<>(0.0, 0.15)(rng);
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = 0; b < v; ++b) {
        if (a == b || std::uniform_real_distribution<>(0, 1)(rng) >= density) continue;
        g.add_edge({EdgeKind::CHAINS_INTO, ids[a], ids[b]});
        chains.push_back({a, b});
      }
      // non-CHAINS_INTO edges must not widen the result
      if (rng() % 4 == 0) g.add_edge({EdgeKind::EXPLOITS, ids[a], "cve"});
    }
    const auto snap = g.snapshot();
    for (std::size_t e = 0; e < v; e += 1 + v / 5) {
      EXPECT_EQ(reachable_tools(*snap, ids[e]), closure_oracle(ids, chains, e)) << "trial " << trial;
    }
  }
}
