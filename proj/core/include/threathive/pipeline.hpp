#pragma once

#include <array>
#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "threathive/config.hpp"
#include "threathive/graph.hpp"
#include "threathive/ingest.hpp"
#include "threathive/knowledge.hpp"
#include "threathive/planner.hpp"
#include "threathive/storage.hpp"

namespace threathive {

class CompletionClient;
class HttpTransport;

// Instrumentation points; tests use them to observe stage inputs.
struct PipelineHooks {
  std::function<void(const std::vector<IntelItem>&)> before_analyze_batch;
  std::function<void(const ThreatCard&, const GraphDelta&)> after_upsert;
};

// Orchestrates gather -> filter -> analyze -> store -> (plan). One run per
// kind at a time; a second request for a busy kind fails with Error{Conflict}.
class Pipeline {
 public:
  Pipeline(PlatformConfig config, const TaxonomyRegistry& registry, Storage& storage, GraphStore& graph,
           HttpTransport& transport, CompletionClient& gateway, PipelineHooks hooks = {}, Clock clock = system_now,
           Collectors::Sleeper sleep = {});
  ~Pipeline();

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  // Blocking run; the record is persisted before it is returned.
  // Throws Error{Precondition} when Analyze has no items or Plan no cards.
  RunRecord run(RunKind kind);

  // Persists a Running record, executes on a worker thread and returns the id.
  std::string start(RunKind kind);

  // Waits for every run started with start().
  void wait();

  // Plans the given cards (all stored cards when empty) and persists the plan.
  RiskPlan plan(const std::vector<std::string>& card_ids);

  ScoringConfig scoring() const;
  // Validates, then re-scores and persists every stored card.
  void set_scoring(const ScoringConfig& scoring);

  const PlatformConfig& config() const noexcept { return config_; }
  const TaxonomyRegistry& registry() const noexcept { return registry_; }

 private:
  class Ticket;
  struct Context;

  void check_preconditions(RunKind kind) const;
  RunRecord new_record(RunKind kind);
  void execute(RunRecord& record);
  void gather(Context& ctx);
  void analyze(Context& ctx);
  void plan_stage(Context& ctx);

  PlatformConfig config_;
  const TaxonomyRegistry& registry_;
  Storage& storage_;
  GraphStore& graph_;
  HttpTransport& transport_;
  CompletionClient& gateway_;
  PipelineHooks hooks_;
  Clock clock_;
  Collectors::Sleeper sleep_;

  mutable std::mutex scoring_mutex_;
  ScoringConfig scoring_;
  std::mutex analyze_mutex_;  // card emission is serialized across run kinds
  std::array<std::atomic<bool>, 4> busy_{};
  std::atomic<unsigned> run_seq_{0};
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

}  // namespace threathive
