#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "threathive/analysis.hpp"
#include "threathive/extraction.hpp"
#include "threathive/gateway.hpp"
#include "threathive/ingest.hpp"
#include "threathive/planner.hpp"
#include "threathive/resolution.hpp"
#include "threathive/scoring.hpp"
#include "threathive/taxonomy.hpp"

namespace threathive {

// One model for everything unless a stage overrides it.
struct ModelConfig {
  std::string default_model = "gpt-4o";
  std::optional<std::string> keywords;
  std::optional<std::string> classification;  // relevance, threat analysis, UPD chains
  std::optional<std::string> extraction;      // entity extraction and resolution
  std::optional<std::string> planning;

  const std::string& for_keywords() const { return keywords ? *keywords : default_model; }
  const std::string& for_classification() const { return classification ? *classification : default_model; }
  const std::string& for_extraction() const { return extraction ? *extraction : default_model; }
  const std::string& for_planning() const { return planning ? *planning : default_model; }
};

struct GraphConfig {
  bool tool_chain_nodes = false;  // materialize Tool nodes for UPD steps
  bool llm_extraction = false;    // run model-based entity extraction per card
  bool technique_nodes = false;   // keyword-matched technique concepts become graph nodes
  ExtractionConfig extraction;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

struct PlatformConfig {
  std::filesystem::path taxonomy_path = "data/taxonomy/mcp38.json";
  LoadMode taxonomy_mode = LoadMode::Strict;
  std::filesystem::path data_dir = "var";
  std::optional<std::filesystem::path> fixture_routes;  // serve HTTP from fixtures instead of the network

  SourceConfig sources;
  ScoringConfig scoring;
  AnalysisConfig analysis;
  PlannerConfig planner;
  ModelConfig models;
  ProviderOptions provider;
  GraphConfig graph;
  ServerConfig server;

  TranscriptMode transcript_mode = TranscriptMode::Live;
  std::optional<std::filesystem::path> transcript_path;

  std::filesystem::path database_path() const { return data_dir / "threathive.db"; }
  std::filesystem::path graph_log_path() const { return data_dir / "graph.log.jsonl"; }

  KeywordOptions keyword_options() const;
  AnalysisConfig analysis_config() const;
  PlannerConfig planner_config() const;
  ResolutionConfig resolution_config() const;
  ExtractionConfig extraction_config() const;
};

// Throws Error{Config} naming the offending section.
void validate(const PlatformConfig& config);

// Unknown keys are rejected. Relative paths resolve against base_dir.
PlatformConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const PlatformConfig& config);

PlatformConfig load_config(const std::filesystem::path& path);
void save_config(const PlatformConfig& config, const std::filesystem::path& path);

}  // namespace threathive
