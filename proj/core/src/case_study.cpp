#include "threathive/case_study.hpp"

#include "threathive/error.hpp"
#include "threathive/runtime.hpp"
#include "threathive/serialization.hpp"

namespace threathive {

CaseStudyReport replay_case_study(const CaseStudyOptions& options) {
  auto config = load_config(options.fixture_dir / "config.json");
  if (!config.fixture_routes) fail(ErrorKind::Config, "case study needs fixture routes", "fixtures");

  std::unique_ptr<ScriptedClient> script;
  RuntimeOptions ro;
  ro.in_memory = true;
  if (options.rerecord_from) {
    script = load_script(*options.rerecord_from);
    config.transcript_mode = TranscriptMode::Record;
    ro.provider_override = script.get();
  }

  CaseStudyReport report;
  ro.hooks.before_analyze_batch = [&report](const std::vector<IntelItem>& batch) {
    std::vector<std::string> ids;
    for (const auto& item : batch) ids.push_back(item.id);
    report.batches.push_back(std::move(ids));
  };

  Runtime rt(config, std::move(ro));
  report.first_run = rt.pipeline().run(RunKind::Full);
  report.second_run = rt.pipeline().run(RunKind::Full);
  report.items = rt.storage().items();
  report.cards = rt.storage().cards();

  UpsertOptions uo;
  for (const auto& item : report.items) uo.item_titles[item.id] = item.title;
  uo.materialize_tool_chain = config.graph.tool_chain_nodes;
  uo.resolution = config.resolution_config();
  for (const auto& card : report.cards) report.reupsert_delta += upsert_card(rt.graph(), card, {}, nullptr, uo);

  report.graph_nodes = rt.graph().node_count();
  report.graph_edges = rt.graph().edge_count();
  report.http_requests = static_cast<FixtureTransport&>(rt.transport()).request_count();
  report.transcript_remaining = rt.transcript().remaining();
  if (options.rerecord_from) rt.save_transcript();
  return report;
}

nlohmann::json to_json(const CaseStudyReport& r) {
  nlohmann::json j;
  j["first_run"] = r.first_run;
  j["second_run"] = r.second_run;
  j["items"] = r.items;
  j["cards"] = r.cards;
  j["reupsert_delta"] = {{"nodes_added", r.reupsert_delta.nodes_added}, {"edges_added", r.reupsert_delta.edges_added}};
  j["graph"] = {{"nodes", r.graph_nodes}, {"edges", r.graph_edges}};
  j["batches"] = r.batches;
  j["http_requests"] = r.http_requests;
  j["transcript_remaining"] = r.transcript_remaining;
  return j;
}

}  // namespace threathive
