#include <gtest/gtest.h>

#include <thread>

#include "schema_check.hpp"
#include "test_support.hpp"
#include "threathive/api.hpp"
#include "threathive/config.hpp"
#include "threathive/error.hpp"
#include "threathive/gateway.hpp"
#include "threathive/http.hpp"
#include "threathive/pipeline.hpp"
#include "threathive/storage.hpp"

using namespace threathive;
using nlohmann::json;
using th_test::schema_errors;

namespace {

const Timestamp kNow = *parse_timestamp("2025-07-01T00:00:00Z");

std::string analysis_reply() {
  json arr = json::array();
  const char* titles[] = {"tool description poisoning", "mcp-remote command injection", "rug pull"};
  const char* ids[] = {"MCP-11", "MCP-32", "MCP-05"};
  const char* strides[] = {"Tampering", "ElevationOfPrivilege", "Spoofing"};
  for (int i = 0; i < 3; ++i) {
    arr.push_back({{"item_index", i},
                   {"title", titles[i]},
                   {"summary", "s"},
                   {"workflow_phase", "ToolInvocation"},
                   {"mcp_ids", i == 1 ? json{"MCP-32", "MCP-24"} : json{ids[i]}},
                   {"stride", strides[i]},
                   {"factors", {{"L", 6}, {"S", 0.9}, {"I", 1.0}, {"D", 1.0}}},
                   {"critical_impact", i == 1},
                   {"cve_ids", i == 1 ? json{"CVE-2025-6514"} : json::array()}});
  }
  return arr.dump();
}

struct Rig {
  Storage storage{":memory:"};
  GraphStore graph;
  FixtureTransport transport;
  ScriptedClient llm;
  std::unique_ptr<Pipeline> pipeline;
  std::unique_ptr<ApiService> api;

  explicit Rig(std::optional<std::filesystem::path> config_path = std::nullopt) {
    PlatformConfig c;
    c.sources.web_search_enabled = false;
    c.sources.github_enabled = false;
    c.sources.nvd_keywords = {};
    c.sources.rss_feeds = {"https://feeds.test/a"};
    c.graph.tool_chain_nodes = true;
    transport.add("https://feeds.test/a",
                  {200, th_test::read_file(th_test::data_path("fixtures/sources/rss_three.xml")), {}});
    llm.add_rule("Taxonomy (id |", analysis_reply());
    llm.add_rule("Threat: mcp-remote",
                 R"({"steps": [{"tool": "remote proxy", "phase": "ParasiticIngestion"},
                               {"tool": "shell", "phase": "PrivacyDisclosure"}], "edges": ["UPD"]})");
    llm.add_rule("Threat: ", R"({"steps": [], "edges": []})");
    llm.add_rule("Title: Rug", "0.2");
    llm.add_rule("Title: ", "0.9");
    pipeline = std::make_unique<Pipeline>(c, th_test::registry(), storage, graph, transport, llm, PipelineHooks{},
                                          [] { return kNow; }, [](std::chrono::milliseconds) {});
    api = std::make_unique<ApiService>(*pipeline, storage, graph, "https://dash.test", config_path);
  }

  ApiResponse get(const std::string& path, std::map<std::string, std::string> q = {}) {
    return api->handle({"GET", path, std::move(q), ""});
  }
  ApiResponse send(const std::string& method, const std::string& path, const std::string& body) {
    return api->handle({method, path, {}, body});
  }
};

#define EXPECT_SCHEMA(body, def) EXPECT_EQ(schema_errors(body, def), "") << (body).dump(2)

}  // namespace

TEST(Api, StatusMapping) {
  EXPECT_EQ(http_status(ErrorKind::Validation), 400);
  EXPECT_EQ(http_status(ErrorKind::Parse), 400);
  EXPECT_EQ(http_status(ErrorKind::Lookup), 404);
  EXPECT_EQ(http_status(ErrorKind::Conflict), 409);
  EXPECT_EQ(http_status(ErrorKind::Precondition), 422);
  EXPECT_EQ(http_status(ErrorKind::Storage), 500);
  EXPECT_EQ(http_status(ErrorKind::Network), 500);
}

TEST(Api, SchemaCheckerRejectsBadDocuments) {
  EXPECT_NE(schema_errors(json{{"runs", json::array({json{{"run_id", "x"}}})}}, "RunList"), "");
  EXPECT_NE(schema_errors(json{{"error", {{"kind", "Lookup"}}}}, "Error"), "");
  EXPECT_NE(schema_errors(json{{"counts", json::object()}, {"total", 0}}, "StrideDistribution"), "");
  EXPECT_EQ(schema_errors(json{{"entry", "a"}, {"tools", json::array()}}, "Reachable"), "");
}

TEST(Api, EmptyStateResponses) {
  Rig rig;
  auto runs = rig.get("/api/runs");
  EXPECT_EQ(runs.status, 200);
  EXPECT_SCHEMA(runs.body, "RunList");
  EXPECT_SCHEMA(rig.get("/api/intel").body, "IntelList");
  EXPECT_SCHEMA(rig.get("/api/threats").body, "ThreatList");
  EXPECT_SCHEMA(rig.get("/api/projections/matrix").body, "Matrix");
  EXPECT_SCHEMA(rig.get("/api/projections/landscape").body, "Landscape");
  auto stride = rig.get("/api/projections/stride");
  EXPECT_SCHEMA(stride.body, "StrideDistribution");
  EXPECT_EQ(stride.body["total"], 0);
  EXPECT_SCHEMA(rig.get("/api/graph/nodes").body, "NodeList");
  EXPECT_SCHEMA(rig.get("/api/graph/edges").body, "EdgeList");
  EXPECT_SCHEMA(rig.get("/api/config/scoring").body, "Scoring");
}

TEST(Api, RunLifecycle) {
  Rig rig;
  auto accepted = rig.send("POST", "/api/runs", R"({"kind": "Full"})");
  ASSERT_EQ(accepted.status, 202);
  EXPECT_SCHEMA(accepted.body, "RunAccepted");
  rig.pipeline->wait();
  const std::string id = accepted.body["run_id"];
  auto run = rig.get("/api/runs/" + id);
  ASSERT_EQ(run.status, 200);
  EXPECT_SCHEMA(run.body, "Run");
  EXPECT_EQ(run.body["status"], "Succeeded");
  EXPECT_EQ(run.body["counts"]["cards_produced"], 2);
  EXPECT_SCHEMA(rig.get("/api/runs").body, "RunList");

  auto missing = rig.get("/api/runs/run-nope");
  EXPECT_EQ(missing.status, 404);
  EXPECT_SCHEMA(missing.body, "Error");
  EXPECT_EQ(missing.body["error"]["subject"], "run-nope");

  for (const char* bad : {R"({"kind": "Everything"})", R"({})", R"([1])", "{not json"}) {
    auto r = rig.send("POST", "/api/runs", bad);
    EXPECT_EQ(r.status, 400) << bad;
    EXPECT_SCHEMA(r.body, "Error");
  }
}

TEST(Api, PreconditionIs422) {
  Rig rig;
  auto r = rig.send("POST", "/api/runs", R"({"kind": "Analyze"})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["error"]["kind"], "precondition");
  auto p = rig.send("POST", "/api/plans", "{}");
  EXPECT_EQ(p.status, 422);
}

TEST(Api, PopulatedResponsesValidate) {
  Rig rig;
  rig.pipeline->run(RunKind::Full);

  auto intel = rig.get("/api/intel");
  EXPECT_SCHEMA(intel.body, "IntelList");
  EXPECT_EQ(intel.body["items"].size(), 3u);
  auto relevant = rig.get("/api/intel", {{"min_relevance", "0.5"}});
  EXPECT_EQ(relevant.body["items"].size(), 2u);
  for (const char* bad : {"abc", "1.5", "-0.1", "0.5x"}) {
    EXPECT_EQ(rig.get("/api/intel", {{"min_relevance", bad}}).status, 400) << bad;
  }

  auto threats = rig.get("/api/threats");
  EXPECT_SCHEMA(threats.body, "ThreatList");
  ASSERT_EQ(threats.body["threats"].size(), 2u);
  const std::string top = threats.body["threats"][0]["id"];
  auto one = rig.get("/api/threats/" + top);
  EXPECT_SCHEMA(one.body, "Threat");
  EXPECT_FALSE(one.body["upd_chain"].is_null());
  EXPECT_EQ(rig.get("/api/threats/none").status, 404);
  EXPECT_EQ(rig.get("/api/threats", {{"level", "Critical"}}).body["threats"].size(), 1u);
  EXPECT_EQ(rig.get("/api/threats", {{"stride", "Tampering"}}).body["threats"].size(), 1u);
  EXPECT_EQ(rig.get("/api/threats", {{"level", "Severe"}}).status, 400);
  EXPECT_EQ(rig.get("/api/threats", {{"stride", "Sneaking"}}).status, 400);

  auto matrix = rig.get("/api/projections/matrix");
  EXPECT_SCHEMA(matrix.body, "Matrix");
  EXPECT_SCHEMA(rig.get("/api/projections/landscape").body, "Landscape");
  auto stride = rig.get("/api/projections/stride");
  EXPECT_SCHEMA(stride.body, "StrideDistribution");
  EXPECT_EQ(stride.body["total"], 2);
  EXPECT_EQ(stride.body["counts"]["ElevationOfPrivilege"], 1);

  auto nodes = rig.get("/api/graph/nodes");
  EXPECT_SCHEMA(nodes.body, "NodeList");
  auto tools = rig.get("/api/graph/nodes", {{"kind", "Tool"}});
  EXPECT_EQ(tools.body["nodes"].size(), 2u);
  EXPECT_EQ(rig.get("/api/graph/nodes", {{"kind", "Planet"}}).status, 400);
  auto edges = rig.get("/api/graph/edges", {{"kind", "CHAINS_INTO"}});
  EXPECT_SCHEMA(edges.body, "EdgeList");
  EXPECT_EQ(edges.body["edges"].size(), 3u);  // threat->MCP-24, threat->proxy, proxy->shell

  const std::string entry = tools.body["nodes"][0]["id"];
  auto reach = rig.get("/api/graph/reachable", {{"entry", entry}});
  EXPECT_SCHEMA(reach.body, "Reachable");
  EXPECT_EQ(reach.body["tools"].size(), 1u);
  EXPECT_EQ(rig.get("/api/graph/reachable").status, 400);
  EXPECT_EQ(rig.get("/api/graph/reachable", {{"entry", "tool:none"}}).status, 404);

  auto plan = rig.send("POST", "/api/plans", json{{"card_ids", {top}}}.dump());
  ASSERT_EQ(plan.status, 201);
  EXPECT_SCHEMA(plan.body, "Plan");
  auto fetched = rig.get("/api/plans/" + plan.body["id"].get<std::string>());
  EXPECT_EQ(fetched.body, plan.body);
  EXPECT_EQ(rig.send("POST", "/api/plans", R"({"card_ids": ["nope"]})").status, 404);
  EXPECT_EQ(rig.send("POST", "/api/plans", R"({"card_ids": "nope"})").status, 400);
  EXPECT_EQ(rig.get("/api/plans/plan-nope").status, 404);
}

TEST(Api, ScoringPatchPersists) {
  const auto dir = th_test::scratch_dir("api-config");
  PlatformConfig base;
  save_config(base, dir / "threathive.json");
  Rig rig(dir / "threathive.json");
  rig.pipeline->run(RunKind::Full);
  const double before = rig.get("/api/threats").body["threats"][0]["scored"]["final"];

  auto r = rig.send("PUT", "/api/config/scoring", R"({"multiplier_semantic": 1.0, "multiplier_chaining": 1.0})");
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_SCHEMA(r.body, "Scoring");
  EXPECT_EQ(r.body["multiplier_semantic"], 1.0);
  EXPECT_EQ(r.body["threshold_high"], 7.0);
  EXPECT_EQ(load_config(dir / "threathive.json").scoring.multiplier_chaining, 1.0);
  const double after = rig.get("/api/threats").body["threats"][0]["scored"]["final"];
  EXPECT_LE(after, before);

  EXPECT_EQ(rig.send("PUT", "/api/config/scoring", R"({"w_L": -1})").status, 400);
  EXPECT_EQ(rig.send("PUT", "/api/config/scoring", R"({"bogus": 1})").status, 400);
  EXPECT_EQ(rig.get("/api/config/scoring").body["w_L"], 0.35);
}

TEST(Api, MethodsCorsAndUnknownRoutes) {
  Rig rig;
  auto opt = rig.send("OPTIONS", "/api/runs", "");
  EXPECT_EQ(opt.status, 204);
  EXPECT_TRUE(opt.body.is_null());
  for (const auto& r : {opt, rig.get("/api/runs"), rig.get("/api/nowhere")}) {
    EXPECT_EQ(r.headers.at("Access-Control-Allow-Origin"), "https://dash.test");
  }
  EXPECT_EQ(rig.get("/api/nowhere").status, 404);
  EXPECT_EQ(rig.get("/metrics").status, 404);
  EXPECT_EQ(rig.send("DELETE", "/api/runs", "").status, 405);
  EXPECT_EQ(rig.send("POST", "/api/threats", "{}").status, 405);
  EXPECT_EQ(rig.send("PUT", "/api/runs/x", "{}").status, 405);
}

TEST(Api, ServesOverHttp) {
  Rig rig;
  const int port = rig.api->bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread server([&] { rig.api->listen(); });
  LiveHttpTransport client;
  const std::string base = "http://127.0.0.1:" + std::to_string(port);
  auto stride = client.get(base + "/api/projections/stride");
  EXPECT_EQ(stride.status, 200);
  EXPECT_EQ(stride.headers["access-control-allow-origin"], "https://dash.test");
  EXPECT_SCHEMA(json::parse(stride.body), "StrideDistribution");
  auto post = client.send({"POST", base + "/api/runs", {{"Content-Type", "application/json"}}, R"({"kind": "Gather"})"});
  EXPECT_EQ(post.status, 202);
  auto missing = client.get(base + "/api/intel?min_relevance=2");
  EXPECT_EQ(missing.status, 400);
  rig.api->stop();
  server.join();
  rig.pipeline->wait();
}
