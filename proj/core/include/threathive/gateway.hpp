#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace threathive {

class HttpTransport;

inline constexpr int kClassificationTokenBudget = 12000;

enum class RequestPurpose { General, Classification };

struct CompletionRequest {
  std::string system_prompt;
  std::string user_prompt;
  int max_output_tokens = kClassificationTokenBudget;
  std::string model_id;
  double temperature = 0.0;
  RequestPurpose purpose = RequestPurpose::General;  // not part of the fingerprint
};

// Throws Error{Validation} for empty prompts or a non-positive budget.
void validate(const CompletionRequest& request);

// Stable SHA-256 over (system_prompt, user_prompt, model_id, max_output_tokens).
std::string request_fingerprint(const CompletionRequest& request);

// Anything that turns a request into raw model text.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

enum class TranscriptMode { Record, Replay, Live };

std::string_view to_string(TranscriptMode mode) noexcept;
std::optional<TranscriptMode> parse_transcript_mode(std::string_view text) noexcept;

struct TranscriptEntry {
  std::string fingerprint;
  std::string response;
  std::string note;  // human-readable hint (model id + prompt excerpt)
};

// Ordered (fingerprint, response) log, stored as JSON lines.
class Transcript {
 public:
  explicit Transcript(TranscriptMode mode = TranscriptMode::Live);
  Transcript(TranscriptMode mode, std::vector<TranscriptEntry> entries);

  Transcript(const Transcript&) = delete;
  Transcript& operator=(const Transcript&) = delete;
  Transcript(Transcript&& other) noexcept;
  Transcript& operator=(Transcript&& other) noexcept;

  static Transcript load(const std::filesystem::path& path, TranscriptMode mode = TranscriptMode::Replay);
  void save(const std::filesystem::path& path) const;

  TranscriptMode mode() const noexcept { return mode_; }
  std::vector<TranscriptEntry> entries() const;
  std::size_t size() const;
  std::size_t remaining() const;

  // Replay: the fingerprint must equal the next recorded entry. Throws
  // Error{ReplayMismatch} otherwise, or when the transcript is exhausted.
  std::string replay_next(const std::string& fingerprint);
  void append(TranscriptEntry entry);

 private:
  TranscriptMode mode_;
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
  std::size_t cursor_ = 0;
};

struct ProviderOptions {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "THREATHIVE_LLM_API_KEY";
  int max_retries = 2;
  std::chrono::milliseconds retry_backoff{500};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

// OpenAI-compatible chat-completions client. The API key is read from the
// environment variable named in the options; construction fails with
// Error{Config} when it is missing, before any network traffic.
class HttpChatProvider final : public CompletionClient {
 public:
  HttpChatProvider(HttpTransport& transport, ProviderOptions options = {});
  std::string complete(const CompletionRequest& request) override;

 private:
  HttpTransport& transport_;
  ProviderOptions options_;
  std::string api_key_;
};

// Mode-aware front door used by every pipeline stage. Replay never touches
// the provider; Record forwards to the provider and appends to the transcript.
class Gateway final : public CompletionClient {
 public:
  Gateway(Transcript& transcript, CompletionClient* provider);

  std::string complete(const CompletionRequest& request) override;

  TranscriptMode mode() const noexcept { return transcript_.mode(); }
  std::size_t call_count() const noexcept { return calls_.load(); }

 private:
  Transcript& transcript_;
  CompletionClient* provider_;
  std::atomic<std::size_t> calls_{0};
};

// Deterministic provider for fixtures and tests. Rules are checked in order;
// the first whose needle occurs in the user (or system) prompt answers.
// Without a matching rule the next queued response is used.
class ScriptedClient final : public CompletionClient {
 public:
  struct Rule {
    std::string needle;
    std::string response;
    bool once = false;
  };

  ScriptedClient() = default;
  explicit ScriptedClient(std::vector<std::string> queue);

  void push(std::string response);
  void add_rule(std::string needle, std::string response, bool once = false);
  void fail_next(std::size_t n = 1);  // next n calls throw Error{Network}

  std::string complete(const CompletionRequest& request) override;

  std::size_t call_count() const;
  std::vector<CompletionRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> queue_;
  std::size_t next_ = 0;
  std::vector<Rule> rules_;
  std::size_t failures_ = 0;
  std::vector<CompletionRequest> seen_;
};

}  // namespace threathive
