#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "threathive/analysis.hpp"
#include "threathive/knowledge.hpp"
#include "threathive/storage.hpp"

namespace threathive {

struct CaseStudyOptions {
  std::filesystem::path fixture_dir;                 // holds config.json
  std::optional<std::filesystem::path> rerecord_from;  // scripted replies; rewrites the transcript
};

struct CaseStudyReport {
  RunRecord first_run;
  RunRecord second_run;
  std::vector<IntelItem> items;
  std::vector<ThreatCard> cards;
  GraphDelta reupsert_delta;  // upserting the stored cards once more
  std::size_t graph_nodes = 0;
  std::size_t graph_edges = 0;
  std::vector<std::vector<std::string>> batches;  // item ids handed to analyze_batch
  std::size_t http_requests = 0;
  std::size_t transcript_remaining = 0;
};

// Two Full runs over the fixture deployment, in memory. The second run must
// find nothing new.
CaseStudyReport replay_case_study(const CaseStudyOptions& options);

nlohmann::json to_json(const CaseStudyReport& report);

}  // namespace threathive
