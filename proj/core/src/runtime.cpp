#include "threathive/runtime.hpp"

#include <fstream>

#include "threathive/error.hpp"

namespace threathive {

Runtime::Runtime(PlatformConfig config, RuntimeOptions options)
    : config_(std::move(config)), registry_(load_taxonomy(config_.taxonomy_path, config_.taxonomy_mode)) {
  if (options.in_memory) {
    storage_ = std::make_unique<Storage>(":memory:");
    graph_ = std::make_unique<GraphStore>();
  } else {
    std::filesystem::create_directories(config_.data_dir);
    storage_ = std::make_unique<Storage>(config_.database_path().string());
    graph_ = std::make_unique<GraphStore>(config_.graph_log_path());
  }

  if (config_.fixture_routes) {
    transport_ = std::make_unique<FixtureTransport>(FixtureTransport::from_routes_file(*config_.fixture_routes));
  } else {
    transport_ = std::make_unique<LiveHttpTransport>();
  }

  switch (config_.transcript_mode) {
    case TranscriptMode::Replay: transcript_ = Transcript::load(*config_.transcript_path, TranscriptMode::Replay); break;
    case TranscriptMode::Record: transcript_ = Transcript(TranscriptMode::Record); break;
    case TranscriptMode::Live: transcript_ = Transcript(TranscriptMode::Live); break;
  }

  CompletionClient* provider = options.provider_override;
  if (!provider && config_.transcript_mode != TranscriptMode::Replay) {
    provider_ = std::make_unique<HttpChatProvider>(*transport_, config_.provider);
    provider = provider_.get();
  }
  gateway_ = std::make_unique<Gateway>(transcript_, provider);
  pipeline_ = std::make_unique<Pipeline>(config_, registry_, *storage_, *graph_, *transport_, *gateway_,
                                         std::move(options.hooks));
}

Runtime::~Runtime() {
  if (pipeline_) pipeline_->wait();
}

void Runtime::save_transcript() const {
  if (config_.transcript_mode != TranscriptMode::Record) return;
  transcript_.save(*config_.transcript_path);
}

std::unique_ptr<ScriptedClient> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open script", path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Parse, e.what(), path.string());
  }
  auto client = std::make_unique<ScriptedClient>();
  for (const auto& r : doc.value("rules", nlohmann::json::array())) {
    client->add_rule(r.at("needle").get<std::string>(), r.at("response").get<std::string>(), r.value("once", false));
  }
  for (const auto& q : doc.value("queue", nlohmann::json::array())) client->push(q.get<std::string>());
  return client;
}

}  // namespace threathive
