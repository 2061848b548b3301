#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_support.hpp"
#include "threathive/analysis.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"

using namespace threathive;
using nlohmann::json;
using th_test::registry;

namespace {

const Timestamp kAt = *parse_timestamp("2025-06-01T00:00:00Z");

IntelItem scored_item(const std::string& title, double relevance) {
  auto i = make_intel_item(title, "body of " + title, "https://news.test/" + std::to_string(title.size()),
                           SourceType::WebSearch, kAt);
  i.relevance = relevance;
  return i;
}

// hand-rolled scoring oracle
double oracle_final(int l, double s, double i, double d, const std::vector<std::string>& ids) {
  double p = 1.0;
  std::set<std::string> flags;
  const auto tax = th_test::taxonomy_json();
  for (const auto& e : tax["entries"]) {
    if (std::find(ids.begin(), ids.end(), e["id"].get<std::string>()) == ids.end()) continue;
    for (const auto& f : e["flags"]) flags.insert(f.get<std::string>());
  }
  if (flags.count("SemanticInferenceTime")) p *= 1.20;
  if (flags.count("ParasiticChaining")) p *= 1.15;
  if (flags.count("LowObservability")) p *= 1.10;
  const double r = 0.35 * l / 7.0 + 0.30 * s + 0.20 * i + 0.15 * d;
  return std::min(10.0, r * p * 10.0);
}

json rec(int idx, std::vector<std::string> ids, int l = 6, double s = 0.85, bool critical = true) {
  return {{"item_index", idx},
          {"title", "threat " + std::to_string(idx)},
          {"summary", "s"},
          {"workflow_phase", "ResponseHandling"},
          {"mcp_ids", ids},
          {"stride", "InformationDisclosure"},
          {"factors", {{"L", l}, {"S", s}, {"I", 0.75}, {"D", 1.0}}},
          {"critical_impact", critical},
          {"cve_ids", json::array()}};
}

AnalysisConfig cfg() {
  AnalysisConfig c;
  c.model_id = "m";
  return c;
}

}  // namespace

TEST(Relevance, ParseReplies) {
  EXPECT_DOUBLE_EQ(*parse_relevance("0.94"), 0.94);
  EXPECT_DOUBLE_EQ(*parse_relevance("Relevance: 0.7, fairly on topic"), 0.7);
  EXPECT_DOUBLE_EQ(*parse_relevance(".5"), 0.5);
  EXPECT_DOUBLE_EQ(*parse_relevance("1"), 1.0);
  EXPECT_FALSE(parse_relevance("7 out of 10"));
  EXPECT_FALSE(parse_relevance("not relevant"));
  EXPECT_FALSE(parse_relevance(""));
}

TEST(Relevance, RetryOnceThenDegrade) {
  auto item = make_intel_item("t", "c", "https://x.test/", SourceType::Rss, kAt);
  ScriptedClient ok({"hmm", "0.8"});
  auto r = score_relevance(item, ok, cfg());
  EXPECT_FALSE(r.degraded);
  EXPECT_DOUBLE_EQ(*item.relevance, 0.8);

  ScriptedClient bad({"hmm", "no idea"});
  auto r2 = score_relevance(item, bad, cfg());
  EXPECT_TRUE(r2.degraded);
  EXPECT_EQ(*item.relevance, 0.0);
  EXPECT_EQ(bad.call_count(), 2u);
}

TEST(Relevance, EmptyContentIsPrecondition) {
  auto item = make_intel_item("t", "  ", "https://x.test/", SourceType::Rss, kAt);
  ScriptedClient s({"0.9"});
  try {
    score_relevance(item, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
  EXPECT_EQ(s.call_count(), 0u);
}

TEST(Relevance, FilterIsStrict) {
  std::vector<IntelItem> items{scored_item("a", 0.94), scored_item("bb", 0.70), scored_item("ccc", 0.69),
                               scored_item("dddd", 0.7000001)};
  auto out = filter_relevant(items, 0.70);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].title, "a");
  EXPECT_EQ(out[1].title, "dddd");
  items.push_back(make_intel_item("e", "c", "https://x.test/e", SourceType::Rss, kAt));
  EXPECT_THROW(filter_relevant(items, 0.70), Error);
}

TEST(Analysis, BatchPreconditions) {
  ScriptedClient s;
  EXPECT_THROW(analyze_batch({}, registry(), s), Error);
  EXPECT_THROW(analyze_batch({scored_item("a", 0.70)}, registry(), s), Error);
  std::vector<IntelItem> six;
  for (int i = 0; i < 6; ++i) six.push_back(scored_item(std::string(i + 1, 'x'), 0.9));
  EXPECT_THROW(analyze_batch(six, registry(), s, {}, cfg()), Error);
  EXPECT_EQ(s.call_count(), 0u);
}

TEST(Analysis, CardsFromReplyMatchScoringOracle) {
  const std::vector<IntelItem> items{scored_item("a", 0.9), scored_item("bb", 0.8)};
  json arr = json::array({rec(0, {"MCP-19"}), rec(1, {"MCP-02", "MCP-03"}, 4, 0.5, false), rec(1, {"MCP-99"})});
  ScriptedClient s({"Step 1: read.\n```json\n" + arr.dump(2) + "\n```"});
  auto r = analyze_batch(items, registry(), s, {}, cfg());
  ASSERT_EQ(r.cards.size(), 2u);
  EXPECT_EQ(r.dropped, 1u);
  EXPECT_FALSE(r.failed);
  EXPECT_EQ(s.requests().front().purpose, RequestPurpose::Classification);
  EXPECT_EQ(s.requests().front().max_output_tokens, 12000);

  const auto& a = r.cards[0];
  EXPECT_NEAR(a.scored.final_score, oracle_final(6, 0.85, 0.75, 1.0, {"MCP-19"}), 1e-9);
  EXPECT_EQ(a.level, RiskLevel::Critical);
  EXPECT_EQ(a.source_item_ids, std::set<std::string>{items[0].id});
  EXPECT_EQ(a.owasp_llm, registry().at("MCP-19").owasp_llm);
  EXPECT_NO_THROW(validate(a, registry()));

  const auto& b = r.cards[1];
  EXPECT_NEAR(b.scored.final_score, oracle_final(4, 0.5, 0.75, 1.0, {"MCP-02", "MCP-03"}), 1e-9);
  EXPECT_EQ(b.mcp_ids, (std::vector<std::string>{"MCP-02", "MCP-03"}));
  EXPECT_TRUE(b.flags.contains(ThreatFlag::ParasiticChaining));
  EXPECT_TRUE(b.flags.contains(ThreatFlag::LowObservability));
  EXPECT_NO_THROW(validate(b, registry()));
}

TEST(Analysis, CriticalNeedsImpact) {
  const std::vector<IntelItem> items{scored_item("a", 0.9)};
  ScriptedClient s({json::array({rec(0, {"MCP-19"}, 6, 0.85, false)}).dump()});
  auto r = analyze_batch(items, registry(), s, {}, cfg());
  ASSERT_EQ(r.cards.size(), 1u);
  EXPECT_EQ(r.cards[0].scored.level, RiskLevel::Critical);
  EXPECT_EQ(r.cards[0].level, RiskLevel::High);
  EXPECT_FALSE(r.cards[0].audit_notes.empty());
}

TEST(Analysis, AssertedCriticalBelowThresholdDowngraded) {
  ThreatCard c = th_test::make_card("x", {"MCP-01"}, 0);
  c.flags = {};
  c.factors = {4, 0.5, 0.5, 0.66};
  c.asserted_level = RiskLevel::Critical;
  c.rce_or_exfil_or_critical_asset = true;
  c = rescore(c, {});
  EXPECT_NE(c.level, RiskLevel::Critical);
  EXPECT_EQ(c.level, c.scored.level);
  EXPECT_GE(c.audit_notes.size(), 1u);
}

TEST(Analysis, MissingFactorsFallBackToBaseline) {
  const std::vector<IntelItem> items{scored_item("a", 0.9)};
  auto r0 = rec(0, {"MCP-28"});
  r0.erase("factors");
  ScriptedClient s({json::array({r0}).dump()});
  auto r = analyze_batch(items, registry(), s, {}, cfg());
  ASSERT_EQ(r.cards.size(), 1u);
  EXPECT_FALSE(r.cards[0].factors_from_model);
  EXPECT_EQ(r.cards[0].factors, registry().at("MCP-28").baseline_factors);
}

TEST(Analysis, OutOfDomainFactorsRejected) {
  const std::vector<IntelItem> items{scored_item("a", 0.9)};
  auto r0 = rec(0, {"MCP-28"});
  r0["factors"]["I"] = 0.6;
  ScriptedClient s({json::array({r0}).dump()});
  auto r = analyze_batch(items, registry(), s, {}, cfg());
  ASSERT_EQ(r.cards.size(), 1u);
  EXPECT_FALSE(r.cards[0].factors_from_model);
}

TEST(Analysis, TruncatedReplyKeepsCompleteRecords) {
  const std::vector<IntelItem> items{scored_item("a", 0.9), scored_item("bb", 0.9)};
  const std::string full = json::array({rec(0, {"MCP-19"}), rec(1, {"MCP-20"})}).dump();
  ScriptedClient s({full.substr(0, full.size() - 40)});
  auto r = analyze_batch(items, registry(), s, {}, cfg());
  EXPECT_EQ(r.stage, RepairStage::FieldExtraction);
  ASSERT_EQ(r.cards.size(), 1u);
  EXPECT_EQ(r.cards[0].title, "threat 0");
}

TEST(Analysis, UnrecoverableAndGatewayFailure) {
  const std::vector<IntelItem> items{scored_item("a", 0.9)};
  ScriptedClient garbage({"I'm sorry, I can't produce that."});
  auto r = analyze_batch(items, registry(), garbage, {}, cfg());
  EXPECT_TRUE(r.failed);
  EXPECT_TRUE(r.cards.empty());

  ScriptedClient down;
  down.fail_next();
  auto r2 = analyze_batch(items, registry(), down, {}, cfg());
  EXPECT_TRUE(r2.failed);
}

TEST(Analysis, CardIdDeterministic) {
  const auto a = threat_card_id({"intel-1"}, "t", {"MCP-01"});
  EXPECT_EQ(a, threat_card_id({"intel-1"}, "t", {"MCP-01"}));
  EXPECT_NE(a, threat_card_id({"intel-1"}, "t", {"MCP-02"}));
  EXPECT_NE(a, threat_card_id({"intel-2"}, "t", {"MCP-01"}));
}

TEST(Analysis, ValidateCatchesInconsistentCard) {
  const std::vector<IntelItem> items{scored_item("a", 0.9)};
  ScriptedClient s({json::array({rec(0, {"MCP-19"})}).dump()});
  auto card = analyze_batch(items, registry(), s, {}, cfg()).cards.at(0);
  auto bad = card;
  bad.owasp_llm.insert("LLM10");
  EXPECT_THROW(validate(bad, registry()), Error);
  bad = card;
  bad.scored.final_score = 3.0;
  EXPECT_THROW(validate(bad, registry()), Error);
  bad = card;
  bad.mcp_ids = {"MCP-99"};
  EXPECT_THROW(validate(bad, registry()), Error);
}

TEST(Upd, ValidityRules) {
  using P = UpdPhase;
  UpdChain ok{{{"read", P::ParasiticIngestion}, {"read", P::PrivacyCollection}, {"send", P::PrivacyDisclosure}},
              {UpdEdge::T2T, UpdEdge::UPD}};
  EXPECT_TRUE(is_valid(ok));
  auto mid = ok;
  mid.edges = {UpdEdge::UPD, UpdEdge::T2T};
  EXPECT_FALSE(is_valid(mid));
  auto short_edges = ok;
  short_edges.edges.pop_back();
  EXPECT_FALSE(is_valid(short_edges));
  EXPECT_FALSE(is_valid(UpdChain{{{"x", P::ParasiticIngestion}}, {}}));
  auto blank = ok;
  blank.steps[1].tool = "";
  EXPECT_FALSE(is_valid(blank));
}

TEST(Upd, ParseReplies) {
  const std::string good =
      R"({"steps": [{"tool": "a", "phase": "ParasiticIngestion"}, {"tool": "b", "phase": "PrivacyDisclosure"}], "edges": ["UPD"]})";
  auto r = parse_upd_chain("chain:\n```json\n" + good + "\n```");
  ASSERT_TRUE(r.chain);
  EXPECT_FALSE(r.degraded);
  EXPECT_EQ(r.chain->steps.size(), 2u);

  auto none = parse_upd_chain(R"({"steps": [], "edges": []})");
  EXPECT_FALSE(none.chain);
  EXPECT_FALSE(none.degraded);

  auto bad = parse_upd_chain(
      R"({"steps": [{"tool": "a", "phase": "ParasiticIngestion"}, {"tool": "b", "phase": "Teleport"}], "edges": ["T2T"]})");
  EXPECT_FALSE(bad.chain);
  EXPECT_TRUE(bad.degraded);
  EXPECT_TRUE(parse_upd_chain("nothing here").degraded);
}

TEST(Upd, AnnotateSurvivesGatewayFailure) {
  ScriptedClient down;
  down.fail_next();
  auto r = annotate_upd_chain(th_test::make_card("x", {"MCP-21"}, 8.0), down, cfg());
  EXPECT_FALSE(r.chain);
  EXPECT_TRUE(r.degraded);
}

TEST(Analysis, ConfigValidation) {
  AnalysisConfig c;
  EXPECT_NO_THROW(validate(c));
  c.relevance_threshold = 1.2;
  EXPECT_THROW(validate(c), Error);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(validate(c), Error);
}
