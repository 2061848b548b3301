#include <benchmark/benchmark.h>

#include <random>

#include "threathive/analysis.hpp"
#include "threathive/graph.hpp"
#include "threathive/projections.hpp"
#include "threathive/repair.hpp"
#include "threathive/scoring.hpp"
#include "threathive/similarity.hpp"
#include "threathive/taxonomy.hpp"

using namespace threathive;

namespace {

const TaxonomyRegistry& registry() {
  static const auto r = load_taxonomy(std::string(THREATHIVE_BENCH_DATA) + "/taxonomy/mcp38.json");
  return r;
}

void BM_FinalScore(benchmark::State& state) {
  const RiskFactors f{6, 0.85, 0.75, 1.0};
  const FlagSet flags{ThreatFlag::SemanticInferenceTime, ThreatFlag::LowObservability};
  for (auto _ : state) benchmark::DoNotOptimize(final_score(f, flags));
}
BENCHMARK(BM_FinalScore);

void BM_Jaccard(benchmark::State& state) {
  const std::string a(static_cast<std::size_t>(state.range(0)), 'x');
  std::string b = a;
  for (std::size_t i = 0; i < b.size(); i += 7) b[i] = 'y';
  for (auto _ : state) benchmark::DoNotOptimize(jaccard(a + " prompt injection", b + " prompt injections"));
}
BENCHMARK(BM_Jaccard)->Arg(16)->Arg(128)->Arg(1024);

std::string batch_payload(int records) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < records; ++i) {
    arr.push_back({{"item_index", i},
                   {"title", "threat " + std::to_string(i)},
                   {"workflow_phase", "ToolInvocation"},
                   {"mcp_ids", {"MCP-20"}},
                   {"stride", "Tampering"},
                   {"factors", {{"L", 5}, {"S", 0.5}, {"I", 0.75}, {"D", 1.0}}}});
  }
  return arr.dump();
}

void BM_RepairStrict(benchmark::State& state) {
  const auto text = batch_payload(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(repair_output(text, threat_record_schema()));
}
BENCHMARK(BM_RepairStrict)->Arg(5)->Arg(50);

void BM_RepairBracket(benchmark::State& state) {
  auto text = batch_payload(static_cast<int>(state.range(0)));
  text.resize(text.size() - 2);
  for (auto _ : state) benchmark::DoNotOptimize(repair_output(text, threat_record_schema()));
}
BENCHMARK(BM_RepairBracket)->Arg(5)->Arg(50);

void BM_RepairFieldExtraction(benchmark::State& state) {
  auto text = batch_payload(static_cast<int>(state.range(0)));
  text.resize(text.rfind("\"stride\""));
  for (auto _ : state) benchmark::DoNotOptimize(repair_output(text, threat_record_schema()));
}
BENCHMARK(BM_RepairFieldExtraction)->Arg(5)->Arg(50);

void BM_Reachability(benchmark::State& state) {
  const auto v = static_cast<std::size_t>(state.range(0));
  GraphStore g;
  std::mt19937 rng(3);
  for (std::size_t i = 0; i < v; ++i) g.add_node({"t" + std::to_string(i), NodeKind::Tool, "tool " + std::to_string(i), {}, "", 0});
  for (std::size_t i = 0; i < v * 2; ++i) {
    const auto a = rng() % v, b = rng() % v;
    if (a != b) g.add_edge({EdgeKind::CHAINS_INTO, "t" + std::to_string(a), "t" + std::to_string(b)});
  }
  const auto snap = g.snapshot();
  for (auto _ : state) benchmark::DoNotOptimize(reachable_tools(*snap, "t0"));
}
BENCHMARK(BM_Reachability)->Arg(50)->Arg(500);

void BM_MatrixProjection(benchmark::State& state) {
  std::vector<ThreatCard> cards;
  std::vector<std::string> ids;
  for (const auto& [id, e] : registry().entries()) ids.push_back(id);
  for (int i = 0; i < state.range(0); ++i) {
    ThreatCard c;
    c.id = "c" + std::to_string(i);
    c.mcp_ids = {ids[static_cast<std::size_t>(i) % ids.size()]};
    c.scored.final_score = 7.5;
    cards.push_back(std::move(c));
  }
  for (auto _ : state) benchmark::DoNotOptimize(matrix_projection(cards, registry()));
}
BENCHMARK(BM_MatrixProjection)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
