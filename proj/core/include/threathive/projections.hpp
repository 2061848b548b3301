#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "threathive/analysis.hpp"
#include "threathive/taxonomy.hpp"

namespace threathive {

struct MatrixCellValue {
  double intensity = 0.0;             // sum of final scores
  std::vector<std::string> threat_ids;

  friend bool operator==(const MatrixCellValue&, const MatrixCellValue&) = default;
};

using MatrixGrid = std::array<std::array<MatrixCellValue, kMatrixCategories>, kMatrixSurfaces>;

struct MatrixProjection {
  MatrixGrid grid{};
  std::vector<std::string> categories;  // column labels from the taxonomy file
};

struct LandscapeCell {
  double height = 0.0;  // max final score, 0 when empty
  std::string color;
};

struct LandscapeProjection {
  std::array<std::array<LandscapeCell, kMatrixCategories>, kMatrixSurfaces> grid{};
};

using StrideDistribution = std::array<int, kStrideCategories.size()>;

// blue, green, red, amber for ServerAPIs, ToolMetadata, RuntimeFlow, Transport.
std::string_view surface_color(AttackSurface surface) noexcept;

// Distinct grid cells covered by the card's taxonomy ids. Unknown ids throw.
std::vector<MatrixCell> mapped_cells(const ThreatCard& card, const TaxonomyRegistry& registry);

// Each card adds its final score to every distinct cell it maps to.
MatrixProjection matrix_projection(const std::vector<ThreatCard>& cards, const TaxonomyRegistry& registry);

LandscapeProjection landscape_projection(const std::vector<ThreatCard>& cards, const TaxonomyRegistry& registry);

StrideDistribution stride_distribution(const std::vector<ThreatCard>& cards);

}  // namespace threathive
