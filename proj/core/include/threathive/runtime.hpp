#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "threathive/config.hpp"
#include "threathive/gateway.hpp"
#include "threathive/graph.hpp"
#include "threathive/http.hpp"
#include "threathive/pipeline.hpp"
#include "threathive/storage.hpp"
#include "threathive/taxonomy.hpp"

namespace threathive {

struct RuntimeOptions {
  bool in_memory = false;                        // ignore data_dir; nothing touches disk
  CompletionClient* provider_override = nullptr; // used instead of the HTTP provider
  PipelineHooks hooks;
};

// Owns every long-lived object a configured deployment needs.
class Runtime {
 public:
  explicit Runtime(PlatformConfig config, RuntimeOptions options = {});
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const PlatformConfig& config() const noexcept { return config_; }
  const TaxonomyRegistry& registry() const noexcept { return registry_; }
  Storage& storage() noexcept { return *storage_; }
  GraphStore& graph() noexcept { return *graph_; }
  HttpTransport& transport() noexcept { return *transport_; }
  Transcript& transcript() noexcept { return transcript_; }
  Gateway& gateway() noexcept { return *gateway_; }
  Pipeline& pipeline() noexcept { return *pipeline_; }

  // Record mode only: writes the transcript to its configured path.
  void save_transcript() const;

 private:
  PlatformConfig config_;
  TaxonomyRegistry registry_;
  std::unique_ptr<Storage> storage_;
  std::unique_ptr<GraphStore> graph_;
  std::unique_ptr<HttpTransport> transport_;
  Transcript transcript_;
  std::unique_ptr<CompletionClient> provider_;
  std::unique_ptr<Gateway> gateway_;
  std::unique_ptr<Pipeline> pipeline_;
};

// {"queue": [...], "rules": [{"needle", "response", "once"}]}
std::unique_ptr<ScriptedClient> load_script(const std::filesystem::path& path);

}  // namespace threathive
