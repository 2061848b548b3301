#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "threathive/error.hpp"
#include "threathive/taxonomy.hpp"

using namespace threathive;
using th_test::registry;
using th_test::taxonomy_json;

namespace {

ErrorKind kind_of(const std::function<void()>& fn, std::string* subject = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (subject) *subject = e.subject();
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::Storage;
}

}  // namespace

TEST(Taxonomy, ShippedFileIsCompleteAndStrict) {
  const auto& r = registry();
  EXPECT_EQ(r.size(), 38u);
  EXPECT_FALSE(r.partial());
  EXPECT_EQ(r.matrix_categories().size(), 17u);
  for (int i = 1; i <= 38; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "MCP-%02d", i);
    EXPECT_TRUE(r.contains(id)) << id;
  }
}

TEST(Taxonomy, DirectPromptInjectionCarriesSemanticFlag) {
  const auto& p = registry().at("MCP-19");
  EXPECT_EQ(p.name, "Direct Prompt Injection");
  EXPECT_EQ(p.flags, FlagSet{ThreatFlag::SemanticInferenceTime});
  EXPECT_EQ(p.baseline_factors, (RiskFactors{6, 0.85, 0.75, 1.0}));
}

TEST(Taxonomy, EmptyEntriesRejectedInStrictMode) {
  auto doc = taxonomy_json();
  doc["entries"] = nlohmann::json::array();
  EXPECT_EQ(kind_of([&] { parse_taxonomy(doc.dump(), LoadMode::Strict); }), ErrorKind::Validation);
  auto partial = parse_taxonomy(doc.dump(), LoadMode::Test);
  EXPECT_TRUE(partial.partial());
  EXPECT_TRUE(partial.empty());
}

TEST(Taxonomy, DuplicateIdNamed) {
  auto doc = taxonomy_json();
  for (auto& e : doc["entries"]) {
    if (e["id"] == "MCP-05") doc["entries"].push_back(e);
  }
  std::string subject;
  EXPECT_EQ(kind_of([&] { parse_taxonomy(doc.dump(), LoadMode::Test); }, &subject), ErrorKind::Validation);
  EXPECT_EQ(subject, "MCP-05");
}

TEST(Taxonomy, BadEntriesNameTheOffender) {
  auto doc = taxonomy_json();
  doc["entries"][3]["baseline_factors"]["L"] = 9;
  const std::string id = doc["entries"][3]["id"];
  std::string subject;
  EXPECT_EQ(kind_of([&] { parse_taxonomy(doc.dump()); }, &subject), ErrorKind::Validation);
  EXPECT_EQ(subject, id);

  doc = taxonomy_json();
  doc["entries"][0]["matrix_cells"] = {{4, 0}};
  EXPECT_EQ(kind_of([&] { parse_taxonomy(doc.dump()); }), ErrorKind::Validation);

  doc = taxonomy_json();
  doc["entries"][0]["id"] = "MCP-39";
  EXPECT_EQ(kind_of([&] { parse_taxonomy(doc.dump()); }), ErrorKind::Validation);

  EXPECT_EQ(kind_of([&] { parse_taxonomy("{\"format\": "); }), ErrorKind::Parse);
}

TEST(Taxonomy, PartialRegistryFlaggedInTestMode) {
  auto doc = taxonomy_json();
  doc["entries"].erase(doc["entries"].begin() + 5, doc["entries"].end());
  EXPECT_THROW(parse_taxonomy(doc.dump(), LoadMode::Strict), Error);
  auto r = parse_taxonomy(doc.dump(), LoadMode::Test);
  EXPECT_EQ(r.size(), 5u);
  EXPECT_TRUE(r.partial());
}

TEST(Bridge, GithubCaseStudyIds) {
  auto m = bridge_to_frameworks({"MCP-20", "MCP-24"}, registry());
  EXPECT_EQ(m.owasp_llm, (std::set<std::string>{"LLM01", "LLM02"}));
  EXPECT_EQ(m.owasp_agentic, (std::set<std::string>{"ASI01", "ASI02"}));
}

TEST(Bridge, EmptySetAndUnknownId) {
  EXPECT_EQ(bridge_to_frameworks({}, registry()), FrameworkMapping{});
  std::string subject;
  EXPECT_EQ(kind_of([&] { bridge_to_frameworks({"MCP-01", "MCP-99"}, registry()); }, &subject), ErrorKind::Lookup);
  EXPECT_EQ(subject, "MCP-99");
}

TEST(Bridge, UnionHomomorphismOverRandomSubsets) {
  const auto ids = th_test::all_ids();
  std::mt19937 rng(20250601);
  std::bernoulli_distribution pick(0.3);
  for (int trial = 0; trial < 500; ++trial) {
    std::set<std::string> a, b;
    for (const auto& id : ids) {
      if (pick(rng)) a.insert(id);
      if (pick(rng)) b.insert(id);
    }
    std::set<std::string> ab = a;
    ab.insert(b.begin(), b.end());
    EXPECT_EQ(bridge_to_frameworks(ab, registry()),
              merge(bridge_to_frameworks(a, registry()), bridge_to_frameworks(b, registry())));
  }
}

TEST(Bridge, MatchesPerEntryTable) {
  // brute force straight from the data file
  const auto doc = taxonomy_json();
  for (const auto& e : doc["entries"]) {
    auto m = bridge_to_frameworks({e["id"].get<std::string>()}, registry());
    EXPECT_EQ(m.owasp_llm, e["owasp_llm"].get<std::set<std::string>>());
    EXPECT_EQ(m.owasp_agentic, e["owasp_agentic"].get<std::set<std::string>>());
  }
}

TEST(Bridge, CombinedFlagsUnion) {
  EXPECT_EQ(combined_flags({"MCP-20", "MCP-24"}, registry()),
            (FlagSet{ThreatFlag::SemanticInferenceTime, ThreatFlag::ParasiticChaining}));
  EXPECT_THROW(combined_flags({"MCP-77"}, registry()), Error);
}
