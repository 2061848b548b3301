#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace threathive {

enum class RepairStage {
  Strict = 1,          // text parsed as-is
  BracketBalance = 2,  // missing closers appended
  FieldExtraction = 3, // records recovered individually
};

struct FieldSpec {
  std::string name;
  bool mandatory = true;
};

// Ordered field list of one output record. Stage 3 anchors on the first
// mandatory field and walks the rest in this order.
struct RecordSchema {
  std::vector<FieldSpec> fields;

  const FieldSpec* anchor() const;
  bool satisfied_by(const nlohmann::json& record) const;
};

struct RepairResult {
  std::vector<nlohmann::json> records;
  RepairStage stage = RepairStage::FieldExtraction;
  std::string text;          // the text that was parsed (stage 1 / 2); payload for stage 3
  std::size_t dropped = 0;   // records rejected for missing mandatory fields
};

// Strip a markdown fence and any prose before the first JSON container.
std::string_view locate_payload(std::string_view raw);

// Closers that complete every open '{' / '[' in reverse stack order. Returns
// nullopt when appending cannot help: the text ends inside a string literal
// or contains a mismatched closer.
std::optional<std::string> missing_closers(std::string_view text);

// Never throws; the worst case is an empty record list at stage 3.
RepairResult repair_output(std::string_view raw, const RecordSchema& schema = {});

}  // namespace threathive
