#include <gtest/gtest.h>

#include "test_support.hpp"
#include "threathive/error.hpp"
#include "threathive/extraction.hpp"
#include "threathive/gateway.hpp"
#include "threathive/knowledge.hpp"

using namespace threathive;

namespace {

ThreatCard card(std::string title, std::vector<std::string> ids, std::set<std::string> items = {"intel-a"}) {
  auto c = th_test::make_card("c", std::move(ids), 8.0);
  c.title = std::move(title);
  c.source_item_ids = std::move(items);
  return c;
}

UpdChain three_step() {
  return {{{"github read tool", UpdPhase::ParasiticIngestion},
           {"github read tool", UpdPhase::PrivacyCollection},
           {"pull request tool", UpdPhase::PrivacyDisclosure}},
          {UpdEdge::T2T, UpdEdge::UPD}};
}

}  // namespace

TEST(Extraction, RulesFindIdsAndTechniques) {
  const std::string text = "Tool Poisoning via cve-2025-6514 (CWE-78); again CVE-2025-6514 and tool poisoning.";
  auto hits = rule_extract(text);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].label, "tool poisoning");
  EXPECT_EQ(hits[0].concept_tag, "Technique");
  EXPECT_EQ(hits[0].offset, 0u);
  EXPECT_EQ(hits[1].label, "CVE-2025-6514");
  EXPECT_EQ(hits[1].kind, NodeKind::CveIdentifier);
  EXPECT_EQ(text.substr(hits[1].offset, hits[1].length), "cve-2025-6514");
  EXPECT_EQ(hits[2].label, "CWE-78");
  EXPECT_EQ(hits[2].concept_tag, "Vulnerability");
}

TEST(Extraction, KeywordNeedsWordStart) {
  EXPECT_TRUE(rule_extract("autotool poisoning").empty());
  EXPECT_TRUE(rule_extract("").empty());
  ExtractionConfig c;
  c.technique_keywords = {"confused deputy"};
  EXPECT_EQ(rule_extract("A Confused Deputy problem", c).size(), 1u);
}

TEST(Extraction, ParseEntitiesMapsConcepts) {
  auto r = parse_entities(R"([{"label": "sandboxing", "kind": "Mitigation"},
                              {"label": "filesystem server", "kind": "component"},
                              {"label": "Sandboxing", "kind": "mitigation"},
                              {"label": "", "kind": "tool"},
                              {"label": "x", "kind": "planet"},
                              {"label": "read_file", "kind": "Tool"}])");
  EXPECT_FALSE(r.degraded);
  ASSERT_EQ(r.entities.size(), 3u);
  EXPECT_EQ(r.entities[0].kind, NodeKind::Mitigation);
  EXPECT_EQ(r.entities[1].kind, NodeKind::ThreatEntity);
  EXPECT_EQ(r.entities[1].concept_tag, "Component");
  EXPECT_EQ(r.entities[2].kind, NodeKind::Tool);
  EXPECT_TRUE(parse_entities("no entities, sorry").degraded);
}

TEST(Extraction, LlmFailureIsDegraded) {
  ScriptedClient down;
  down.fail_next();
  EXPECT_TRUE(llm_extract("some text", down).degraded);
  ScriptedClient s;
  EXPECT_TRUE(llm_extract("   ", s).entities.empty());
  EXPECT_EQ(s.call_count(), 0u);
}

TEST(Knowledge, CaseStudyShape) {
  GraphStore g;
  auto c = card("GitHub MCP indirect prompt injection", {"MCP-20", "MCP-24"});
  c.upd_chain = three_step();
  auto d = upsert_card(g, c, {}, nullptr, {{{"intel-a", "article"}}, false, {}});
  EXPECT_EQ(d.nodes_added, 4);
  EXPECT_EQ(d.edges_added, 3);
  auto s = g.snapshot();
  EXPECT_EQ(s->find("item:intel-a")->canonical_label, "article");
  const std::set<GraphEdge> edges(s->edges.begin(), s->edges.end());
  const auto threat = s->nodes_of_kind(NodeKind::ThreatEntity).at(0)->id;
  EXPECT_TRUE(edges.count({EdgeKind::DESCRIBES, "item:intel-a", threat}));
  EXPECT_TRUE(edges.count({EdgeKind::INSTANCES_OF, threat, "mcp:MCP-20"}));
  EXPECT_TRUE(edges.count({EdgeKind::CHAINS_INTO, threat, "mcp:MCP-24"}));
  EXPECT_EQ(upsert_card(g, c, {}, nullptr), GraphDelta{});
}

TEST(Knowledge, WithoutChainSecondaryIsInstance) {
  GraphStore g;
  upsert_card(g, card("t", {"MCP-01", "MCP-02"}), {}, nullptr);
  const auto s = g.snapshot();
  for (const auto& e : s->edges) EXPECT_NE(e.kind, EdgeKind::CHAINS_INTO);
}

TEST(Knowledge, EntitiesAndCves) {
  GraphStore g;
  auto c = card("mcp-remote command injection", {"MCP-32"});
  c.cve_ids = {"CVE-2025-6514"};
  std::vector<ExtractedEntity> ents{{"CVE-2025-6514", NodeKind::CveIdentifier, "", 0, 0},
                                    {"CVE-2025-49596", NodeKind::CveIdentifier, "", 0, 0},
                                    {"input sanitization", NodeKind::Mitigation, "", 0, 0},
                                    {"CWE-78", NodeKind::ThreatEntity, "Vulnerability", 0, 0},
                                    {"mcp-remote", NodeKind::Tool, "", 0, 0}};
  auto d = upsert_card(g, c, ents, nullptr);
  // item, threat, mcp id, two cves, mitigation, cwe concept; tools off
  EXPECT_EQ(d.nodes_added, 7);
  EXPECT_EQ(d.edges_added, 6);
  EXPECT_TRUE(d.rejected.empty());
  EXPECT_TRUE(constraint_violations(*g.snapshot()).empty());
  EXPECT_TRUE(g.snapshot()->nodes_of_kind(NodeKind::Tool).empty());
}

TEST(Knowledge, ToolChainMaterialized) {
  GraphStore g;
  auto c = card("chain", {"MCP-21", "MCP-22"});
  c.upd_chain = three_step();
  UpsertOptions o;
  o.materialize_tool_chain = true;
  upsert_card(g, c, {}, nullptr, o);
  const auto s = g.snapshot();
  ASSERT_EQ(s->nodes_of_kind(NodeKind::Tool).size(), 2u);  // repeated tool resolves to one node
  const auto threat = s->nodes_of_kind(NodeKind::ThreatEntity).at(0)->id;
  const auto reach = reachable_tools(*s, threat);
  EXPECT_EQ(reach.size(), 3u);  // both tools plus the chained taxonomy id
}

TEST(Knowledge, NearDuplicateTitlesMerge) {
  GraphStore g;
  upsert_card(g, card("prompt injection", {"MCP-19"}, {"intel-a"}), {}, nullptr);
  ScriptedClient s;
  auto d = upsert_card(g, card("prompt injections", {"MCP-19"}, {"intel-b"}), {}, &s);
  EXPECT_EQ(s.call_count(), 0u);
  EXPECT_EQ(d.nodes_added, 1);  // only the new item
  EXPECT_EQ(g.snapshot()->nodes_of_kind(NodeKind::ThreatEntity).size(), 1u);
  EXPECT_EQ(g.snapshot()->nodes_of_kind(NodeKind::ThreatEntity)[0]->aliases,
            std::set<std::string>{"prompt injections"});
}

TEST(Knowledge, EmptyCardRejected) {
  GraphStore g;
  ThreatCard c;
  c.title = "x";
  EXPECT_THROW(upsert_card(g, c, {}, nullptr), Error);
}
