#include <gtest/gtest.h>

#include <fstream>

#include "test_support.hpp"
#include "threathive/config.hpp"
#include "threathive/error.hpp"
#include "threathive/storage.hpp"

using namespace threathive;
using nlohmann::json;

namespace {

const Timestamp kAt = *parse_timestamp("2025-06-01T00:00:00Z");

IntelItem item(const std::string& title) {
  return make_intel_item(title, "content " + title, "https://x.test/" + title, SourceType::Rss, kAt);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Parse;
}

}  // namespace

TEST(Storage, ItemsKeepRelevanceAcrossUpserts) {
  Storage s(":memory:");
  auto a = item("a");
  EXPECT_TRUE(s.upsert_item(a));
  s.set_relevance(a.id, 0.9);
  EXPECT_FALSE(s.upsert_item(a));
  EXPECT_DOUBLE_EQ(*s.item(a.id)->relevance, 0.9);
  EXPECT_FALSE(s.item("nope"));
  EXPECT_THROW(s.set_relevance("nope", 0.5), Error);
}

TEST(Storage, RelevanceQueryAndAnalyzedMark) {
  Storage s(":memory:");
  auto a = item("a"), b = item("b"), c = item("c");
  for (auto* i : {&a, &b, &c}) s.upsert_item(*i);
  s.set_relevance(a.id, 0.95);
  s.set_relevance(b.id, 0.5);
  EXPECT_EQ(s.items().size(), 3u);
  auto hi = s.items(0.9);
  ASSERT_EQ(hi.size(), 1u);
  EXPECT_EQ(hi[0].id, a.id);
  s.mark_analyzed(a.id);
  EXPECT_EQ(s.unanalyzed_items().size(), 2u);
}

TEST(Storage, TransactionRollsBack) {
  Storage s(":memory:");
  EXPECT_THROW(s.transaction([&] {
    s.upsert_item(item("a"));
    throw std::runtime_error("boom");
  }),
               std::runtime_error);
  EXPECT_TRUE(s.items().empty());
}

TEST(Storage, CardsRoundTripAndOrder) {
  Storage s(":memory:");
  auto a = th_test::make_card("a", {"MCP-19"}, 5.0);
  auto b = th_test::make_card("b", {"MCP-20", "MCP-24"}, 9.0, StrideCategory::InformationDisclosure);
  b.upd_chain = UpdChain{{{"r", UpdPhase::ParasiticIngestion}, {"w", UpdPhase::PrivacyDisclosure}}, {UpdEdge::UPD}};
  b.owasp_llm = {"LLM01"};
  b.cve_ids = {"CVE-2025-6514"};
  b.audit_notes = {"note"};
  b.asserted_level = RiskLevel::Critical;
  auto c = th_test::make_card("c", {"MCP-01"}, 5.0);
  for (auto* x : {&a, &b, &c}) s.upsert_card(*x);
  EXPECT_EQ(*s.card("b"), b);
  const auto all = s.cards();
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].id, "b");
  EXPECT_EQ(all[1].id, "a");
  EXPECT_EQ(all[2].id, "c");
  b.scored.final_score = 1.0;
  s.upsert_card(b);
  EXPECT_EQ(s.cards().back().id, "b");
}

TEST(Storage, RunsAndPlans) {
  Storage s(":memory:");
  RunRecord r;
  r.run_id = "run-1";
  r.kind = RunKind::Gather;
  r.started = kAt;
  r.status = RunStatus::PartialFailure;
  r.counts.items_collected = 3;
  r.errors = {"feed down"};
  s.save_run(r);
  r.finished = kAt;
  s.save_run(r);
  EXPECT_EQ(*s.run("run-1"), r);
  EXPECT_EQ(s.runs().size(), 1u);

  RiskPlan p;
  p.id = "plan-x";
  p.entries = {{"a", 9.0, {"logs"}, {{"m", Priority::P0, Effort::Low}}, {"MCP-19"}, false}};
  p.notes = {"n"};
  s.save_plan(p);
  EXPECT_EQ(*s.plan("plan-x"), p);
  EXPECT_FALSE(s.plan("plan-y"));
}

TEST(Storage, PersistsOnDisk) {
  const auto dir = th_test::scratch_dir("storage");
  const auto a = item("a");
  {
    Storage s((dir / "db.sqlite").string());
    s.upsert_item(a);
  }
  Storage again((dir / "db.sqlite").string());
  EXPECT_EQ(again.item(a.id)->title, "a");
}

TEST(Config, DefaultsValidate) {
  PlatformConfig c;
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.analysis_config().model_id, "gpt-4o");
  c.models.planning = "small";
  EXPECT_EQ(c.planner_config().model_id, "small");
  EXPECT_EQ(c.resolution_config().model_id, "gpt-4o");
}

TEST(Config, SaveLoadRoundTrip) {
  const auto dir = th_test::scratch_dir("config");
  PlatformConfig c;
  c.data_dir = dir / "var";
  c.taxonomy_path = th_test::data_path("taxonomy/mcp38.json");
  c.analysis.relevance_threshold = 0.8;
  c.sources.seed_queries = {"q"};
  c.scoring.threshold_high = 6.5;
  c.server.port = 9999;
  c.transcript_mode = TranscriptMode::Replay;
  c.transcript_path = dir / "t.jsonl";
  save_config(c, dir / "threathive.json");
  const auto back = load_config(dir / "threathive.json");
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_EQ(back.server.port, 9999);
}

TEST(Config, RelativePathsFollowTheFile) {
  const auto dir = th_test::scratch_dir("config-rel");
  std::ofstream(dir / "c.json") << R"({"data_dir": "state", "taxonomy": {"path": "tax.json"}})";
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.data_dir, dir / "state");
  EXPECT_EQ(c.taxonomy_path, dir / "tax.json");
}

TEST(Config, Rejections) {
  EXPECT_EQ(kind_of([] { config_from_json(json{{"colour", 1}}); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"analysis", {{"relevance_treshold", 0.5}}}}); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"analysis", {{"relevance_threshold", 2.0}}}}); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"transcript", {{"mode", "rewind"}}}}); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { config_from_json(json{{"server", {{"port", 70000}}}}); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/threathive.json"); }), ErrorKind::Config);
}
