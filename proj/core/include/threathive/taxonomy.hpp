#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "threathive/scoring.hpp"

namespace threathive {

enum class StrideCategory {
  Spoofing,
  Tampering,
  Repudiation,
  InformationDisclosure,
  DenialOfService,
  ElevationOfPrivilege,
};

inline constexpr std::array<StrideCategory, 6> kStrideCategories = {
    StrideCategory::Spoofing,        StrideCategory::Tampering,       StrideCategory::Repudiation,
    StrideCategory::InformationDisclosure, StrideCategory::DenialOfService, StrideCategory::ElevationOfPrivilege};

enum class WorkflowPhase { TaskPlanning, ToolInvocation, ResponseHandling, CrossPhase };

enum class AttackSurface { ServerApis, ToolMetadata, RuntimeFlow, Transport };

inline constexpr std::array<AttackSurface, 4> kAttackSurfaces = {
    AttackSurface::ServerApis, AttackSurface::ToolMetadata, AttackSurface::RuntimeFlow, AttackSurface::Transport};

inline constexpr std::size_t kMatrixSurfaces = 4;
inline constexpr std::size_t kMatrixCategories = 17;

std::string_view to_string(StrideCategory c) noexcept;
std::string_view to_string(WorkflowPhase p) noexcept;
std::string_view to_string(AttackSurface s) noexcept;

// Accept the canonical enum spelling as well as spaced / hyphenated prose
// ("Information Disclosure", "Cross-Phase", "Server APIs").
std::optional<StrideCategory> parse_stride(std::string_view text) noexcept;
std::optional<WorkflowPhase> parse_workflow_phase(std::string_view text) noexcept;
std::optional<AttackSurface> parse_attack_surface(std::string_view text) noexcept;

std::size_t index_of(AttackSurface s) noexcept;
std::size_t index_of(StrideCategory c) noexcept;

struct MatrixCell {
  std::size_t surface = 0;   // row, 0..3
  std::size_t category = 0;  // column, 0..16

  friend auto operator<=>(const MatrixCell&, const MatrixCell&) = default;
};

struct ThreatPattern {
  std::string id;  // "MCP-01".."MCP-38"
  std::string name;
  std::string description;
  WorkflowPhase workflow_phase = WorkflowPhase::CrossPhase;
  AttackSurface attack_surface = AttackSurface::ServerApis;
  StrideCategory stride_primary = StrideCategory::Tampering;
  FlagSet flags;
  RiskFactors baseline_factors;
  std::set<std::string> owasp_llm;
  std::set<std::string> owasp_agentic;
  std::vector<MatrixCell> matrix_cells;

  friend bool operator==(const ThreatPattern&, const ThreatPattern&) = default;
};

bool is_valid_taxonomy_id(std::string_view id) noexcept;

class TaxonomyRegistry {
 public:
  static constexpr std::size_t kCompleteSize = 38;

  TaxonomyRegistry() = default;
  TaxonomyRegistry(std::string version, std::vector<std::string> matrix_categories,
                   std::map<std::string, ThreatPattern> entries, bool partial);

  const std::string& version() const noexcept { return version_; }
  const std::vector<std::string>& matrix_categories() const noexcept { return matrix_categories_; }
  const std::map<std::string, ThreatPattern>& entries() const noexcept { return entries_; }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  bool partial() const noexcept { return partial_; }
  bool contains(std::string_view id) const;

  const ThreatPattern* find(std::string_view id) const;
  // Throws Error{Lookup} naming the id.
  const ThreatPattern& at(std::string_view id) const;

  friend bool operator==(const TaxonomyRegistry&, const TaxonomyRegistry&) = default;

 private:
  std::string version_;
  std::vector<std::string> matrix_categories_;
  std::map<std::string, ThreatPattern> entries_;
  bool partial_ = false;
};

enum class LoadMode {
  Strict,  // exactly 38 entries required
  Test,    // partial registries allowed and flagged
};

TaxonomyRegistry parse_taxonomy(std::string_view text, LoadMode mode = LoadMode::Strict);
TaxonomyRegistry load_taxonomy(const std::filesystem::path& path, LoadMode mode = LoadMode::Strict);

struct FrameworkMapping {
  std::set<std::string> owasp_llm;
  std::set<std::string> owasp_agentic;

  friend bool operator==(const FrameworkMapping&, const FrameworkMapping&) = default;
};

FrameworkMapping merge(FrameworkMapping a, const FrameworkMapping& b);

// Set-union of the per-entry OWASP mappings. Pure lookup; throws
// Error{Lookup} on the first unknown id.
FrameworkMapping bridge_to_frameworks(const std::set<std::string>& ids, const TaxonomyRegistry& registry);

// Union of the priority flags of every listed entry. Unknown ids throw.
FlagSet combined_flags(const std::vector<std::string>& ids, const TaxonomyRegistry& registry);

}  // namespace threathive
