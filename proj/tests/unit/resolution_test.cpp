#include <gtest/gtest.h>

#include "test_support.hpp"
#include "threathive/gateway.hpp"
#include "threathive/resolution.hpp"
#include "threathive/similarity.hpp"

using namespace threathive;

namespace {

std::shared_ptr<const GraphSnapshot> graph_with(std::vector<std::string> labels, NodeKind kind = NodeKind::ThreatEntity) {
  static std::vector<std::unique_ptr<GraphStore>> keep;
  keep.push_back(std::make_unique<GraphStore>());
  int i = 0;
  for (auto& l : labels) {
    GraphNode g;
    g.id = "n" + std::to_string(i++);
    g.kind = kind;
    g.canonical_label = l;
    keep.back()->add_node(g);
  }
  return keep.back()->snapshot();
}

}  // namespace

TEST(Resolution, YesNoParsing) {
  EXPECT_EQ(parse_yes_no("YES"), true);
  EXPECT_EQ(parse_yes_no("yes."), true);
  EXPECT_EQ(parse_yes_no("No, they differ"), false);
  EXPECT_FALSE(parse_yes_no("maybe"));
  EXPECT_FALSE(parse_yes_no(""));
}

TEST(Resolution, TierOneExact) {
  auto g = graph_with({"Prompt Injection"});
  ScriptedClient s;
  auto r = resolve_entity("  prompt   INJECTION ", NodeKind::ThreatEntity, *g, &s);
  EXPECT_EQ(r.decision, ResolutionDecision::ExactMatch);
  EXPECT_EQ(r.matched_node, "n0");
  EXPECT_EQ(s.call_count(), 0u);
}

TEST(Resolution, KindsDoNotMix) {
  auto g = graph_with({"prompt injection"}, NodeKind::Mitigation);
  ScriptedClient s;
  auto r = resolve_entity("prompt injection", NodeKind::ThreatEntity, *g, &s);
  EXPECT_EQ(r.decision, ResolutionDecision::NewEntity);
  EXPECT_FALSE(r.similarity);
}

TEST(Resolution, TierTwoJaccardWithoutGateway) {
  const double j = jaccard("prompt injection", "prompt injections");
  ASSERT_NEAR(j, 14.0 / 15.0, 1e-12);
  auto g = graph_with({"tool shadowing", "prompt injection"});
  ScriptedClient s;
  auto r = resolve_entity("prompt injections", NodeKind::ThreatEntity, *g, &s);
  EXPECT_EQ(r.decision, ResolutionDecision::JaccardMerge);
  EXPECT_EQ(r.matched_node, "n1");
  EXPECT_NEAR(*r.similarity, j, 1e-12);
  EXPECT_EQ(s.call_count(), 0u);
}

TEST(Resolution, TierTwoTieGoesToEarliest) {
  auto g = graph_with({"prompt injectionX", "prompt injectionY"});
  auto r = resolve_entity("prompt injection", NodeKind::ThreatEntity, *g, nullptr);
  ASSERT_EQ(r.decision, ResolutionDecision::JaccardMerge);
  EXPECT_EQ(r.matched_node, "n0");
}

TEST(Resolution, TierThreeAsksOnce) {
  const std::string existing = "tool poisoning", fresh = "tool poisoning attack";
  const double j = jaccard(fresh, existing);
  ASSERT_GE(j, 0.5);
  ASSERT_LT(j, 0.75);
  auto g = graph_with({existing});

  ScriptedClient yes({"YES"});
  auto r = resolve_entity(fresh, NodeKind::ThreatEntity, *g, &yes);
  EXPECT_EQ(r.decision, ResolutionDecision::LlmConfirmedMerge);
  EXPECT_EQ(r.matched_node, "n0");
  EXPECT_EQ(yes.call_count(), 1u);
  EXPECT_EQ(yes.requests()[0].user_prompt, resolution_question(fresh, existing));

  ScriptedClient no({"NO"});
  auto r2 = resolve_entity(fresh, NodeKind::ThreatEntity, *g, &no);
  EXPECT_EQ(r2.decision, ResolutionDecision::NewEntity);
  EXPECT_FALSE(r2.degraded);
  EXPECT_EQ(no.call_count(), 1u);
}

TEST(Resolution, TierThreeDegradesWithoutAnswer) {
  auto g = graph_with({"tool poisoning"});
  ScriptedClient mumble({"perhaps"});
  auto r = resolve_entity("tool poisoning attack", NodeKind::ThreatEntity, *g, &mumble);
  EXPECT_EQ(r.decision, ResolutionDecision::NewEntity);
  EXPECT_TRUE(r.degraded);
  auto r2 = resolve_entity("tool poisoning attack", NodeKind::ThreatEntity, *g, nullptr);
  EXPECT_EQ(r2.decision, ResolutionDecision::NewEntity);
  EXPECT_TRUE(r2.degraded);
}

TEST(Resolution, BelowHalfIsNewWithoutCall) {
  const double j = jaccard("dns rebinding", "tool poisoning");
  ASSERT_LT(j, 0.5);
  auto g = graph_with({"tool poisoning"});
  ScriptedClient s;
  auto r = resolve_entity("dns rebinding", NodeKind::ThreatEntity, *g, &s);
  EXPECT_EQ(r.decision, ResolutionDecision::NewEntity);
  EXPECT_EQ(s.call_count(), 0u);
  EXPECT_NEAR(*r.similarity, j, 1e-12);
}

TEST(Resolution, AliasesCountForExactMatch) {
  GraphStore store;
  GraphNode g;
  g.id = "x";
  g.kind = NodeKind::Tool;
  g.canonical_label = "github read tool";
  store.add_node(g);
  store.add_alias("x", "GitHub issue reader");
  auto r = resolve_entity("github issue reader", NodeKind::Tool, *store.snapshot(), nullptr);
  EXPECT_EQ(r.decision, ResolutionDecision::ExactMatch);
}
