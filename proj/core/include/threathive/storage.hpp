#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "threathive/analysis.hpp"
#include "threathive/ingest.hpp"
#include "threathive/planner.hpp"

struct sqlite3;

namespace threathive {

enum class RunKind { Gather, Analyze, Plan, Full };
enum class RunStatus { Running, Succeeded, PartialFailure, Failed };

std::string_view to_string(RunKind kind) noexcept;
std::string_view to_string(RunStatus status) noexcept;
std::optional<RunKind> parse_run_kind(std::string_view text) noexcept;
std::optional<RunStatus> parse_run_status(std::string_view text) noexcept;

struct RunCounts {
  int items_collected = 0;
  int items_filtered = 0;  // items that passed the relevance gate
  int cards_produced = 0;
  int nodes_added = 0;
  int edges_added = 0;
  int gateway_calls = 0;

  friend bool operator==(const RunCounts&, const RunCounts&) = default;
};

struct RunRecord {
  std::string run_id;
  RunKind kind = RunKind::Full;
  Timestamp started{};
  std::optional<Timestamp> finished;
  RunCounts counts;
  RunStatus status = RunStatus::Running;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool degraded = false;
  std::optional<std::string> plan_id;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// Embedded relational store (SQLite) for items, cards, runs and plans.
// Calls are serialized on one connection.
class Storage {
 public:
  // ":memory:" gives a private in-memory database.
  explicit Storage(const std::string& path);
  ~Storage();

  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  // BEGIN IMMEDIATE / COMMIT; rolls back and rethrows when fn throws.
  void transaction(const std::function<void()>& fn);

  // Inserts a new item or refreshes title/content; relevance and the
  // analyzed mark of an existing row are preserved. Returns true if new.
  bool upsert_item(const IntelItem& item);
  void set_relevance(const std::string& item_id, double relevance);
  void mark_analyzed(const std::string& item_id);
  std::optional<IntelItem> item(const std::string& id) const;
  std::vector<IntelItem> items(std::optional<double> min_relevance = std::nullopt) const;
  std::vector<IntelItem> unanalyzed_items() const;

  void upsert_card(const ThreatCard& card);
  std::optional<ThreatCard> card(const std::string& id) const;
  std::vector<ThreatCard> cards() const;  // final score descending, ties by id

  void save_run(const RunRecord& run);
  std::optional<RunRecord> run(const std::string& id) const;
  std::vector<RunRecord> runs() const;

  void save_plan(const RiskPlan& plan);
  std::optional<RiskPlan> plan(const std::string& id) const;

 private:
  void exec(const char* sql);

  mutable std::recursive_mutex mutex_;
  sqlite3* db_ = nullptr;
};

}  // namespace threathive
