#include "threathive/pipeline.hpp"

#include <deque>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "threathive/analysis.hpp"
#include "threathive/error.hpp"
#include "threathive/extraction.hpp"
#include "threathive/gateway.hpp"
#include "threathive/http.hpp"

namespace threathive {

namespace {

// Per-run call counter in front of the shared gateway.
class CountingClient final : public CompletionClient {
 public:
  explicit CountingClient(CompletionClient& inner) : inner_(inner) {}
  std::string complete(const CompletionRequest& request) override {
    ++calls_;
    return inner_.complete(request);
  }
  int calls() const noexcept { return calls_.load(); }

 private:
  CompletionClient& inner_;
  std::atomic<int> calls_{0};
};

std::string describe(const CollectorError& e) {
  std::string out(to_string(e.source));
  if (!e.url.empty()) out += " " + e.url;
  return out + ": " + e.message;
}

}  // namespace

class Pipeline::Ticket {
 public:
  Ticket(std::atomic<bool>& flag, RunKind kind) : flag_(&flag) {
    bool expected = false;
    if (!flag.compare_exchange_strong(expected, true)) {
      fail(ErrorKind::Conflict, "a run of this kind is already in progress", std::string(to_string(kind)));
    }
  }
  Ticket(Ticket&& other) noexcept : flag_(std::exchange(other.flag_, nullptr)) {}
  Ticket(const Ticket&) = delete;
  ~Ticket() {
    if (flag_) flag_->store(false);
  }

 private:
  std::atomic<bool>* flag_;
};

struct Pipeline::Context {
  RunRecord& record;
  CountingClient client;
  ScoringConfig scoring;
};

Pipeline::Pipeline(PlatformConfig config, const TaxonomyRegistry& registry, Storage& storage, GraphStore& graph,
                   HttpTransport& transport, CompletionClient& gateway, PipelineHooks hooks, Clock clock,
                   Collectors::Sleeper sleep)
    : config_(std::move(config)),
      registry_(registry),
      storage_(storage),
      graph_(graph),
      transport_(transport),
      gateway_(gateway),
      hooks_(std::move(hooks)),
      clock_(std::move(clock)),
      sleep_(std::move(sleep)),
      scoring_(config_.scoring) {
  validate(config_);
}

Pipeline::~Pipeline() { wait(); }

void Pipeline::wait() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

ScoringConfig Pipeline::scoring() const {
  std::lock_guard lock(scoring_mutex_);
  return scoring_;
}

void Pipeline::set_scoring(const ScoringConfig& scoring) {
  validate(scoring);
  std::lock_guard analyze(analyze_mutex_);
  auto cards = storage_.cards();
  storage_.transaction([&] {
    for (auto& card : cards) storage_.upsert_card(rescore(std::move(card), scoring));
  });
  std::lock_guard lock(scoring_mutex_);
  scoring_ = scoring;
}

void Pipeline::check_preconditions(RunKind kind) const {
  if (kind == RunKind::Analyze && storage_.items().empty()) {
    fail(ErrorKind::Precondition, "nothing to analyze; run a gather first");
  }
  if (kind == RunKind::Plan && storage_.cards().empty()) {
    fail(ErrorKind::Precondition, "no threat cards to plan; run an analysis first");
  }
}

RunRecord Pipeline::new_record(RunKind kind) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  RunRecord r;
  r.kind = kind;
  r.started = clock_();
  std::ostringstream id;
  id << "run-" << r.started.time_since_epoch().count() << '-' << run_seq_.fetch_add(1) << '-' << std::hex
     << (rng() & 0xffffff);
  r.run_id = id.str();
  return r;
}

RunRecord Pipeline::run(RunKind kind) {
  Ticket ticket(busy_[static_cast<std::size_t>(kind)], kind);
  check_preconditions(kind);
  auto record = new_record(kind);
  storage_.save_run(record);
  execute(record);
  return record;
}

std::string Pipeline::start(RunKind kind) {
  Ticket ticket(busy_[static_cast<std::size_t>(kind)], kind);
  check_preconditions(kind);
  auto record = new_record(kind);
  storage_.save_run(record);
  const std::string id = record.run_id;
  std::lock_guard lock(workers_mutex_);
  workers_.emplace_back([this, record = std::move(record), ticket = std::move(ticket)]() mutable {
    execute(record);
  });
  return id;
}

void Pipeline::execute(RunRecord& record) {
  Context ctx{record, CountingClient(gateway_), scoring()};
  try {
    switch (record.kind) {
      case RunKind::Gather: gather(ctx); break;
      case RunKind::Analyze: analyze(ctx); break;
      case RunKind::Plan: plan_stage(ctx); break;
      case RunKind::Full:
        gather(ctx);
        analyze(ctx);
        if (config_.planner.enabled_in_full_run && !storage_.cards().empty()) plan_stage(ctx);
        break;
    }
    if (record.status == RunStatus::Running) record.status = RunStatus::Succeeded;
  } catch (const std::exception& e) {
    spdlog::error("run {} failed: {}", record.run_id, e.what());
    record.status = RunStatus::Failed;
    record.errors.push_back(e.what());
  }
  record.counts.gateway_calls = ctx.client.calls();
  record.finished = std::max(clock_(), record.started);
  try {
    storage_.save_run(record);
  } catch (const std::exception& e) {
    spdlog::error("could not persist run {}: {}", record.run_id, e.what());
  }
}

void Pipeline::gather(Context& ctx) {
  auto& rec = ctx.record;
  const auto& src = config_.sources;

  std::vector<SearchQuery> queries;
  if (src.web_search_enabled) {
    if (!src.seed_queries.empty()) {
      for (const auto& q : src.seed_queries) queries.push_back({q, Specificity::Narrow, {}, 0});
    } else {
      auto kp = generate_keywords(registry_, ctx.client, config_.keyword_options());
      if (kp.degraded) {
        rec.degraded = true;
        rec.warnings.push_back("keyword generation fell back to templates");
      }
      queries = std::move(kp.queries);
    }
  }

  Collectors collectors(src, transport_, clock_, sleep_);
  CollectionResult all;
  for (const auto& q : queries) all.merge(collectors.search_with_relaxation(q));
  for (const auto& feed : src.rss_feeds) all.merge(collectors.collect_rss(feed));
  const auto now = clock_();
  for (const auto& kw : src.nvd_keywords) {
    all.merge(collectors.collect_nvd({kw, now - std::chrono::days{src.nvd_window_days}, now}));
  }
  if (src.github_enabled) all.merge(collectors.collect_github_advisories({src.github_keyword, 50}));

  for (const auto& w : all.warnings) rec.warnings.push_back(w);
  for (const auto& e : all.errors) rec.errors.push_back(describe(e));

  std::vector<IntelItem> items;
  for (auto& item : dedup(all.items)) {
    try {
      validate(item, now);
      items.push_back(std::move(item));
    } catch (const Error& e) {
      rec.warnings.push_back(std::string("dropped item: ") + e.what());
    }
  }
  int fresh = 0;
  storage_.transaction([&] {
    for (const auto& item : items) fresh += storage_.upsert_item(item) ? 1 : 0;
  });
  rec.counts.items_collected += fresh;
  if (!all.errors.empty()) rec.status = RunStatus::PartialFailure;
  spdlog::info("gather: {} items, {} source errors", items.size(), all.errors.size());
}

void Pipeline::analyze(Context& ctx) {
  std::lock_guard serial(analyze_mutex_);
  auto& rec = ctx.record;
  const auto acfg = config_.analysis_config();

  auto pending = storage_.unanalyzed_items();
  for (auto& item : pending) {
    if (item.relevance) continue;
    try {
      auto r = score_relevance(item, ctx.client, acfg);
      if (r.degraded) {
        rec.degraded = true;
        rec.warnings.push_back("relevance defaulted to 0 for " + item.id);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Precondition) throw;
      item.relevance = 0.0;
      rec.warnings.push_back("unscorable item " + item.id + ": " + e.what());
    }
    storage_.set_relevance(item.id, *item.relevance);
  }

  const auto relevant = filter_relevant(pending, acfg.relevance_threshold);
  std::set<std::string> kept;
  for (const auto& item : relevant) kept.insert(item.id);
  storage_.transaction([&] {
    for (const auto& item : pending) {
      if (!kept.count(item.id)) storage_.mark_analyzed(item.id);
    }
  });
  rec.counts.items_filtered += static_cast<int>(relevant.size());

  std::deque<std::pair<std::vector<IntelItem>, int>> queue;
  for (std::size_t i = 0; i < relevant.size(); i += static_cast<std::size_t>(acfg.batch_size)) {
    const auto end = std::min(relevant.size(), i + static_cast<std::size_t>(acfg.batch_size));
    queue.push_back({{relevant.begin() + static_cast<std::ptrdiff_t>(i), relevant.begin() + static_cast<std::ptrdiff_t>(end)}, 0});
  }

  std::map<std::string, std::string> titles;
  for (const auto& item : relevant) titles[item.id] = item.title;

  while (!queue.empty()) {
    auto [batch, attempt] = std::move(queue.front());
    queue.pop_front();
    if (hooks_.before_analyze_batch) hooks_.before_analyze_batch(batch);
    auto result = analyze_batch(batch, registry_, ctx.client, ctx.scoring, acfg);
    for (const auto& note : result.notes) rec.warnings.push_back(note);
    if (result.failed) {
      if (attempt == 0) {
        queue.push_back({std::move(batch), 1});
      } else {
        rec.degraded = true;
        rec.errors.push_back("batch of " + std::to_string(batch.size()) + " items failed twice; left for the next run");
        rec.status = RunStatus::PartialFailure;
      }
      continue;
    }
    if (result.stage != RepairStage::Strict) rec.degraded = true;

    std::vector<std::pair<ThreatCard, std::vector<ExtractedEntity>>> done;
    for (auto& card : result.cards) {
      auto upd = annotate_upd_chain(card, ctx.client, acfg);
      card.upd_chain = upd.chain;
      rec.degraded = rec.degraded || upd.degraded;

      std::string text = card.title + "\n" + card.summary;
      for (const auto& item : batch) {
        if (std::find(card.source_item_ids.begin(), card.source_item_ids.end(), item.id) != card.source_item_ids.end()) {
          text += "\n" + item.content;
        }
      }
      const auto ecfg = config_.extraction_config();
      std::vector<ExtractedEntity> entities;
      for (auto& e : rule_extract(text, ecfg)) {
        if (e.concept_tag == "Technique" && !config_.graph.technique_nodes) continue;
        entities.push_back(std::move(e));
      }
      if (config_.graph.llm_extraction) {
        auto llm = llm_extract(text, ctx.client, ecfg);
        rec.degraded = rec.degraded || llm.degraded;
        for (auto& e : llm.entities) entities.push_back(std::move(e));
      }
      done.emplace_back(std::move(card), std::move(entities));
    }

    storage_.transaction([&] {
      for (const auto& [card, entities] : done) storage_.upsert_card(card);
      for (const auto& item : batch) storage_.mark_analyzed(item.id);
    });
    rec.counts.cards_produced += static_cast<int>(done.size());

    UpsertOptions opts;
    opts.item_titles = titles;
    opts.materialize_tool_chain = config_.graph.tool_chain_nodes;
    opts.resolution = config_.resolution_config();
    for (const auto& [card, entities] : done) {
      auto delta = upsert_card(graph_, card, entities, &ctx.client, opts);
      rec.counts.nodes_added += delta.nodes_added;
      rec.counts.edges_added += delta.edges_added;
      rec.degraded = rec.degraded || delta.degraded;
      for (const auto& r : delta.rejected) rec.warnings.push_back("edge rejected: " + r);
      if (hooks_.after_upsert) hooks_.after_upsert(card, delta);
    }
  }
  spdlog::info("analyze: {} relevant, {} cards, +{} nodes, +{} edges", relevant.size(), rec.counts.cards_produced,
               rec.counts.nodes_added, rec.counts.edges_added);
}

void Pipeline::plan_stage(Context& ctx) {
  auto plan = build_plan(storage_.cards(), ctx.client, config_.planner_config());
  storage_.save_plan(plan);
  ctx.record.plan_id = plan.id;
  if (plan.degraded) ctx.record.degraded = true;
  for (const auto& n : plan.notes) ctx.record.warnings.push_back(n);
}

RiskPlan Pipeline::plan(const std::vector<std::string>& card_ids) {
  std::vector<ThreatCard> cards;
  if (card_ids.empty()) {
    cards = storage_.cards();
  } else {
    std::set<std::string> seen;
    for (const auto& id : card_ids) {
      if (!seen.insert(id).second) continue;
      auto card = storage_.card(id);
      if (!card) fail(ErrorKind::Lookup, "unknown threat card", id);
      cards.push_back(std::move(*card));
    }
  }
  if (cards.empty()) fail(ErrorKind::Precondition, "no threat cards to plan");
  auto plan = build_plan(cards, gateway_, config_.planner_config());
  storage_.save_plan(plan);
  return plan;
}

}  // namespace threathive
