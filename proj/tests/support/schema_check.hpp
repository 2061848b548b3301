#pragma once

#include <rapidjson/document.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

#include <map>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

namespace th_test {

// Validates `doc` against one definition of the published API schema.
// Returns an empty string on success, else where validation failed.
inline std::string schema_errors(const nlohmann::json& doc, const std::string& definition) {
  static const nlohmann::json published = nlohmann::json::parse(read_file(data_path("schemas/api.schema.json")));
  static std::map<std::string, std::unique_ptr<rapidjson::SchemaDocument>> compiled;
  auto& schema = compiled[definition];
  if (!schema) {
    nlohmann::json root = published;
    root["$ref"] = "#/definitions/" + definition;
    rapidjson::Document sd;
    sd.Parse(root.dump().c_str());
    schema = std::make_unique<rapidjson::SchemaDocument>(sd);
  }
  rapidjson::Document d;
  const std::string text = doc.dump();
  d.Parse(text.c_str());
  if (d.HasParseError()) return "unparseable document";
  rapidjson::SchemaValidator v(*schema);
  if (d.Accept(v)) return {};
  rapidjson::StringBuffer where, rule;
  v.GetInvalidDocumentPointer().StringifyUriFragment(where);
  v.GetInvalidSchemaPointer().StringifyUriFragment(rule);
  return std::string(v.GetInvalidSchemaKeyword()) + " at " + where.GetString() + " (schema " + rule.GetString() + ")";
}

}  // namespace th_test
