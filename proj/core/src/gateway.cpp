#include "threathive/gateway.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "hashing.hpp"
#include "threathive/error.hpp"
#include "threathive/http.hpp"

namespace threathive {

using nlohmann::json;

void validate(const CompletionRequest& r) {
  if (r.system_prompt.empty()) fail(ErrorKind::Validation, "system prompt must be non-empty", "system_prompt");
  if (r.user_prompt.empty()) fail(ErrorKind::Validation, "user prompt must be non-empty", "user_prompt");
  if (r.max_output_tokens < 1) fail(ErrorKind::Validation, "max_output_tokens must be >= 1", "max_output_tokens");
}

std::string request_fingerprint(const CompletionRequest& r) {
  const std::string budget = std::to_string(r.max_output_tokens);
  return detail::fields_digest({r.system_prompt, r.user_prompt, r.model_id, budget});
}

std::string_view to_string(TranscriptMode mode) noexcept {
  switch (mode) {
    case TranscriptMode::Record: return "record";
    case TranscriptMode::Replay: return "replay";
    case TranscriptMode::Live: return "live";
  }
  return "?";
}

std::optional<TranscriptMode> parse_transcript_mode(std::string_view text) noexcept {
  for (auto m : {TranscriptMode::Record, TranscriptMode::Replay, TranscriptMode::Live}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

Transcript::Transcript(TranscriptMode mode) : mode_(mode) {}

Transcript::Transcript(TranscriptMode mode, std::vector<TranscriptEntry> entries)
    : mode_(mode), entries_(std::move(entries)) {}

Transcript::Transcript(Transcript&& other) noexcept
    : mode_(other.mode_), entries_(std::move(other.entries_)), cursor_(other.cursor_) {}

Transcript& Transcript::operator=(Transcript&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mutex_, other.mutex_);
    mode_ = other.mode_;
    entries_ = std::move(other.entries_);
    cursor_ = other.cursor_;
  }
  return *this;
}

Transcript Transcript::load(const std::filesystem::path& path, TranscriptMode mode) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open transcript", path.string());
  std::vector<TranscriptEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      entries.push_back(TranscriptEntry{j.at("fingerprint").get<std::string>(), j.at("response").get<std::string>(),
                                        j.value("note", std::string{})});
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, "bad transcript record at line " + std::to_string(lineno) + ": " + e.what(),
           path.string());
    }
  }
  return Transcript(mode, std::move(entries));
}

void Transcript::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mutex_);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Storage, "cannot write transcript", path.string());
  for (const auto& e : entries_) {
    json j{{"fingerprint", e.fingerprint}, {"response", e.response}};
    if (!e.note.empty()) j["note"] = e.note;
    out << j.dump() << '\n';
  }
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t Transcript::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::size_t Transcript::remaining() const {
  std::lock_guard lock(mutex_);
  return entries_.size() - cursor_;
}

std::string Transcript::replay_next(const std::string& fingerprint) {
  std::lock_guard lock(mutex_);
  if (cursor_ >= entries_.size()) {
    fail(ErrorKind::ReplayMismatch, "transcript exhausted after " + std::to_string(entries_.size()) + " entries",
         fingerprint);
  }
  const auto& e = entries_[cursor_];
  if (e.fingerprint != fingerprint) {
    fail(ErrorKind::ReplayMismatch,
         "request #" + std::to_string(cursor_ + 1) + " does not match the recorded entry " + e.fingerprint +
             (e.note.empty() ? "" : " (" + e.note + ")"),
         fingerprint);
  }
  ++cursor_;
  return e.response;
}

void Transcript::append(TranscriptEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

HttpChatProvider::HttpChatProvider(HttpTransport& transport, ProviderOptions options)
    : transport_(transport), options_(std::move(options)) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    fail(ErrorKind::Config, "live LLM access needs an API key in $" + options_.api_key_env, options_.api_key_env);
  }
  api_key_ = key;
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string HttpChatProvider::complete(const CompletionRequest& request) {
  validate(request);
  const json body{{"model", request.model_id},
                  {"temperature", request.temperature},
                  {"max_tokens", request.max_output_tokens},
                  {"messages",
                   json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                {{"role", "user"}, {"content", request.user_prompt}}})}};
  HttpRequest http{"POST",
                   options_.endpoint,
                   {{"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}},
                   body.dump()};

  std::string last_error;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) options_.sleep(options_.retry_backoff * (1 << (attempt - 1)));
    HttpResponse resp;
    try {
      resp = transport_.send(http);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Network) throw;
      last_error = e.what();
      continue;
    }
    if (resp.status == 429 || resp.status >= 500) {
      last_error = "provider returned HTTP " + std::to_string(resp.status);
      continue;
    }
    if (resp.status != 200) {
      fail(ErrorKind::Network, "provider rejected request with HTTP " + std::to_string(resp.status),
           options_.endpoint);
    }
    try {
      const json j = json::parse(resp.body);
      const json& content = j.at("choices").at(0).at("message").at("content");
      return content.is_string() ? content.get<std::string>() : std::string{};
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, std::string("unexpected provider response: ") + e.what(), options_.endpoint);
    }
  }
  fail(ErrorKind::Network, "giving up after " + std::to_string(options_.max_retries + 1) + " attempts: " + last_error,
       options_.endpoint);
}

Gateway::Gateway(Transcript& transcript, CompletionClient* provider) : transcript_(transcript), provider_(provider) {
  if (transcript_.mode() != TranscriptMode::Replay && provider_ == nullptr) {
    fail(ErrorKind::Config, "live and record modes need a configured provider", "gateway");
  }
}

std::string Gateway::complete(const CompletionRequest& request) {
  validate(request);
  if (request.purpose == RequestPurpose::Classification && request.max_output_tokens < kClassificationTokenBudget) {
    spdlog::warn("classification call with max_output_tokens={} (< {}); reasoning models may truncate output",
                 request.max_output_tokens, kClassificationTokenBudget);
  }
  ++calls_;
  const std::string fp = request_fingerprint(request);
  switch (transcript_.mode()) {
    case TranscriptMode::Replay:
      return transcript_.replay_next(fp);
    case TranscriptMode::Live:
      return provider_->complete(request);
    case TranscriptMode::Record: {
      std::string response = provider_->complete(request);
      std::string note = request.model_id + " | " + request.user_prompt.substr(0, 60);
      for (auto& c : note) {
        if (c == '\n') c = ' ';
      }
      transcript_.append(TranscriptEntry{fp, response, std::move(note)});
      return response;
    }
  }
  fail(ErrorKind::Config, "unknown transcript mode", "gateway");
}

ScriptedClient::ScriptedClient(std::vector<std::string> queue) : queue_(std::move(queue)) {}

void ScriptedClient::push(std::string response) {
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(response));
}

void ScriptedClient::add_rule(std::string needle, std::string response, bool once) {
  std::lock_guard lock(mutex_);
  rules_.push_back(Rule{std::move(needle), std::move(response), once});
}

void ScriptedClient::fail_next(std::size_t n) {
  std::lock_guard lock(mutex_);
  failures_ += n;
}

std::string ScriptedClient::complete(const CompletionRequest& request) {
  std::lock_guard lock(mutex_);
  seen_.push_back(request);
  if (failures_ > 0) {
    --failures_;
    fail(ErrorKind::Network, "scripted provider failure", "scripted");
  }
  for (auto it = rules_.begin(); it != rules_.end(); ++it) {
    if (request.user_prompt.find(it->needle) != std::string::npos ||
        request.system_prompt.find(it->needle) != std::string::npos) {
      std::string response = it->response;
      if (it->once) rules_.erase(it);
      return response;
    }
  }
  if (next_ < queue_.size()) return queue_[next_++];
  fail(ErrorKind::Network, "scripted provider has no response for request #" + std::to_string(seen_.size()),
       "scripted");
}

std::size_t ScriptedClient::call_count() const {
  std::lock_guard lock(mutex_);
  return seen_.size();
}

std::vector<CompletionRequest> ScriptedClient::requests() const {
  std::lock_guard lock(mutex_);
  return seen_;
}

}  // namespace threathive
