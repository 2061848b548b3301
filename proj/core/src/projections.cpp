#include "threathive/projections.hpp"

#include <algorithm>
#include <set>

namespace threathive {

std::string_view surface_color(AttackSurface surface) noexcept {
  switch (surface) {
    case AttackSurface::ServerApis: return "blue";
    case AttackSurface::ToolMetadata: return "green";
    case AttackSurface::RuntimeFlow: return "red";
    case AttackSurface::Transport: return "amber";
  }
  return "gray";
}

std::vector<MatrixCell> mapped_cells(const ThreatCard& card, const TaxonomyRegistry& registry) {
  std::set<MatrixCell> cells;
  for (const auto& id : card.mcp_ids) {
    const auto& entry = registry.at(id);
    cells.insert(entry.matrix_cells.begin(), entry.matrix_cells.end());
  }
  return {cells.begin(), cells.end()};
}

MatrixProjection matrix_projection(const std::vector<ThreatCard>& cards, const TaxonomyRegistry& registry) {
  MatrixProjection out;
  out.categories = registry.matrix_categories();
  for (const auto& card : cards) {
    for (const auto& c : mapped_cells(card, registry)) {
      auto& cell = out.grid[c.surface][c.category];
      cell.intensity += card.scored.final_score;
      cell.threat_ids.push_back(card.id);
    }
  }
  return out;
}

LandscapeProjection landscape_projection(const std::vector<ThreatCard>& cards, const TaxonomyRegistry& registry) {
  LandscapeProjection out;
  for (auto surface : kAttackSurfaces) {
    for (auto& cell : out.grid[index_of(surface)]) cell.color = std::string(surface_color(surface));
  }
  for (const auto& card : cards) {
    for (const auto& c : mapped_cells(card, registry)) {
      auto& cell = out.grid[c.surface][c.category];
      cell.height = std::max(cell.height, card.scored.final_score);
    }
  }
  return out;
}

StrideDistribution stride_distribution(const std::vector<ThreatCard>& cards) {
  StrideDistribution out{};
  for (const auto& card : cards) ++out[index_of(card.stride)];
  return out;
}

}  // namespace threathive
