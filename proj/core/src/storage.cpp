#include "threathive/storage.hpp"

#include <sqlite3.h>

#include <spdlog/spdlog.h>

#include "threathive/error.hpp"
#include "threathive/serialization.hpp"

namespace threathive {

using nlohmann::json;

std::string_view to_string(RunKind kind) noexcept {
  switch (kind) {
    case RunKind::Gather: return "Gather";
    case RunKind::Analyze: return "Analyze";
    case RunKind::Plan: return "Plan";
    case RunKind::Full: return "Full";
  }
  return "?";
}

std::string_view to_string(RunStatus status) noexcept {
  switch (status) {
    case RunStatus::Running: return "Running";
    case RunStatus::Succeeded: return "Succeeded";
    case RunStatus::PartialFailure: return "PartialFailure";
    case RunStatus::Failed: return "Failed";
  }
  return "?";
}

std::optional<RunKind> parse_run_kind(std::string_view text) noexcept {
  for (auto k : {RunKind::Gather, RunKind::Analyze, RunKind::Plan, RunKind::Full}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::optional<RunStatus> parse_run_status(std::string_view text) noexcept {
  for (auto s : {RunStatus::Running, RunStatus::Succeeded, RunStatus::PartialFailure, RunStatus::Failed}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS intel_items (
  seq          INTEGER PRIMARY KEY AUTOINCREMENT,
  id           TEXT NOT NULL UNIQUE,
  title        TEXT NOT NULL,
  content      TEXT NOT NULL,
  source_url   TEXT NOT NULL,
  source_type  TEXT NOT NULL,
  collected_at TEXT NOT NULL,
  relevance    REAL,
  analyzed     INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS threat_cards (
  id          TEXT PRIMARY KEY,
  level       TEXT NOT NULL,
  stride      TEXT NOT NULL,
  final_score REAL NOT NULL,
  body        TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS runs (
  run_id  TEXT PRIMARY KEY,
  kind    TEXT NOT NULL,
  status  TEXT NOT NULL,
  started TEXT NOT NULL,
  body    TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS plans (
  id   TEXT PRIMARY KEY,
  body TEXT NOT NULL
);
)sql";

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      fail(ErrorKind::Storage, std::string("prepare failed: ") + sqlite3_errmsg(db), sql);
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int i, double v) {
    check(sqlite3_bind_double(stmt_, i, v));
    return *this;
  }
  Statement& bind(int i, std::optional<double> v) {
    check(v ? sqlite3_bind_double(stmt_, i, *v) : sqlite3_bind_null(stmt_, i));
    return *this;
  }

  // true while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail(ErrorKind::Storage, std::string("step failed: ") + sqlite3_errmsg(db_));
  }

  std::string text(int col) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
    return p ? std::string(p, static_cast<std::size_t>(sqlite3_column_bytes(stmt_, col))) : std::string{};
  }
  std::optional<double> real(int col) const {
    if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
    return sqlite3_column_double(stmt_, col);
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) fail(ErrorKind::Storage, std::string("bind failed: ") + sqlite3_errmsg(db_));
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

constexpr const char* kItemColumns = "id, title, content, source_url, source_type, collected_at, relevance";

IntelItem read_item(const Statement& s) {
  IntelItem item;
  item.id = s.text(0);
  item.title = s.text(1);
  item.content = s.text(2);
  item.source_url = s.text(3);
  auto type = parse_source_type(s.text(4));
  if (!type) fail(ErrorKind::Storage, "corrupt source_type", item.id);
  item.source_type = *type;
  auto ts = parse_timestamp(s.text(5));
  if (!ts) fail(ErrorKind::Storage, "corrupt collected_at", item.id);
  item.collected_at = *ts;
  item.relevance = s.real(6);
  return item;
}

template <typename T>
T read_body(const std::string& body, const std::string& what) {
  try {
    return json::parse(body).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Storage, "corrupt " + what + " row: " + e.what());
  }
}

}  // namespace

Storage::Storage(const std::string& path) {
  const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
  if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    fail(ErrorKind::Storage, "cannot open database: " + msg, path);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA foreign_keys = ON;");
  if (path != ":memory:") exec("PRAGMA journal_mode = WAL;");
  exec(kSchema);
}

Storage::~Storage() { sqlite3_close(db_); }

void Storage::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    fail(ErrorKind::Storage, msg);
  }
}

void Storage::transaction(const std::function<void()>& fn) {
  std::lock_guard lock(mutex_);
  exec("BEGIN IMMEDIATE;");
  try {
    fn();
    exec("COMMIT;");
  } catch (...) {
    sqlite3_exec(db_, "ROLLBACK;", nullptr, nullptr, nullptr);
    throw;
  }
}

bool Storage::upsert_item(const IntelItem& item) {
  std::lock_guard lock(mutex_);
  Statement s(db_,
              "INSERT INTO intel_items (id, title, content, source_url, source_type, collected_at, relevance) "
              "VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7) "
              "ON CONFLICT(id) DO UPDATE SET title = excluded.title, content = excluded.content");
  s.bind(1, item.id)
      .bind(2, item.title)
      .bind(3, item.content)
      .bind(4, item.source_url)
      .bind(5, std::string(to_string(item.source_type)))
      .bind(6, format_timestamp(item.collected_at))
      .bind(7, item.relevance);
  Statement probe(db_, "SELECT 1 FROM intel_items WHERE id = ?1");
  probe.bind(1, item.id);
  const bool existed = probe.step();
  s.step();
  return !existed;
}

void Storage::set_relevance(const std::string& item_id, double relevance) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "UPDATE intel_items SET relevance = ?2 WHERE id = ?1");
  s.bind(1, item_id).bind(2, relevance);
  s.step();
  if (sqlite3_changes(db_) == 0) fail(ErrorKind::Lookup, "unknown intel item", item_id);
}

void Storage::mark_analyzed(const std::string& item_id) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "UPDATE intel_items SET analyzed = 1 WHERE id = ?1");
  s.bind(1, item_id);
  s.step();
}

std::optional<IntelItem> Storage::item(const std::string& id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, (std::string("SELECT ") + kItemColumns + " FROM intel_items WHERE id = ?1").c_str());
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return read_item(s);
}

std::vector<IntelItem> Storage::items(std::optional<double> min_relevance) const {
  std::lock_guard lock(mutex_);
  std::string sql = std::string("SELECT ") + kItemColumns + " FROM intel_items";
  if (min_relevance) sql += " WHERE relevance IS NOT NULL AND relevance >= ?1";
  sql += " ORDER BY seq";
  Statement s(db_, sql.c_str());
  if (min_relevance) s.bind(1, *min_relevance);
  std::vector<IntelItem> out;
  while (s.step()) out.push_back(read_item(s));
  return out;
}

std::vector<IntelItem> Storage::unanalyzed_items() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, (std::string("SELECT ") + kItemColumns + " FROM intel_items WHERE analyzed = 0 ORDER BY seq").c_str());
  std::vector<IntelItem> out;
  while (s.step()) out.push_back(read_item(s));
  return out;
}

void Storage::upsert_card(const ThreatCard& card) {
  std::lock_guard lock(mutex_);
  Statement s(db_,
              "INSERT INTO threat_cards (id, level, stride, final_score, body) VALUES (?1, ?2, ?3, ?4, ?5) "
              "ON CONFLICT(id) DO UPDATE SET level = excluded.level, stride = excluded.stride, "
              "final_score = excluded.final_score, body = excluded.body");
  s.bind(1, card.id)
      .bind(2, std::string(to_string(card.level)))
      .bind(3, std::string(to_string(card.stride)))
      .bind(4, card.scored.final_score)
      .bind(5, json(card).dump());
  s.step();
}

std::optional<ThreatCard> Storage::card(const std::string& id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT body FROM threat_cards WHERE id = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return read_body<ThreatCard>(s.text(0), "threat card");
}

std::vector<ThreatCard> Storage::cards() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT body FROM threat_cards ORDER BY final_score DESC, id ASC");
  std::vector<ThreatCard> out;
  while (s.step()) out.push_back(read_body<ThreatCard>(s.text(0), "threat card"));
  return out;
}

void Storage::save_run(const RunRecord& run) {
  std::lock_guard lock(mutex_);
  Statement s(db_,
              "INSERT INTO runs (run_id, kind, status, started, body) VALUES (?1, ?2, ?3, ?4, ?5) "
              "ON CONFLICT(run_id) DO UPDATE SET status = excluded.status, body = excluded.body");
  s.bind(1, run.run_id)
      .bind(2, std::string(to_string(run.kind)))
      .bind(3, std::string(to_string(run.status)))
      .bind(4, format_timestamp(run.started))
      .bind(5, json(run).dump());
  s.step();
}

std::optional<RunRecord> Storage::run(const std::string& id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT body FROM runs WHERE run_id = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return read_body<RunRecord>(s.text(0), "run");
}

std::vector<RunRecord> Storage::runs() const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT body FROM runs ORDER BY started, rowid");
  std::vector<RunRecord> out;
  while (s.step()) out.push_back(read_body<RunRecord>(s.text(0), "run"));
  return out;
}

void Storage::save_plan(const RiskPlan& plan) {
  std::lock_guard lock(mutex_);
  Statement s(db_, "INSERT INTO plans (id, body) VALUES (?1, ?2) ON CONFLICT(id) DO UPDATE SET body = excluded.body");
  s.bind(1, plan.id).bind(2, json(plan).dump());
  s.step();
}

std::optional<RiskPlan> Storage::plan(const std::string& id) const {
  std::lock_guard lock(mutex_);
  Statement s(db_, "SELECT body FROM plans WHERE id = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return read_body<RiskPlan>(s.text(0), "plan");
}

}  // namespace threathive
