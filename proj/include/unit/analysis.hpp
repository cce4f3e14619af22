#pragma once

// Geometry diagnostics over an item representation table.

#include "unit/common.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace unit::analysis {

inline constexpr std::size_t kDefaultPairBudget = 200000;

struct IntraSequenceResult {
  double global_mean = 0.0;
  double intra_mean = 0.0;
  double ratio = 0.0;
};

// Mean Euclidean distance within sequences relative to the catalog-wide mean.
// Either scope is exact when its pair count fits the budget, otherwise sampled.
IntraSequenceResult intra_sequence_ratio(const Mat& item_table, const std::vector<std::vector<int>>& sequences,
                                         std::size_t max_pairs_per_scope = kDefaultPairBudget, std::uint64_t seed = 0);

struct PopularitySplitResult {
  double distance_pop = 0.0;
  double distance_cold = 0.0;
  std::vector<int> popular;
  std::vector<int> cold;
};

PopularitySplitResult popularity_distance_split(const Mat& item_table, std::span<const std::int64_t> counts,
                                                double pop_fraction = 0.4,
                                                std::size_t max_pairs = kDefaultPairBudget, std::uint64_t seed = 0);

// Mean pairwise Euclidean distance among `rows`.
double mean_pairwise_distance(const Mat& item_table, std::span<const int> rows, std::size_t max_pairs, Rng& rng);

// Centered projection onto the top-2 principal directions; each direction's
// first nonzero coordinate is positive.
Mat pca_project_2d(const Mat& item_table);

struct KdeExport {
  Mat points;  // n x 2, unit norm
  double grid_min = -1.2;
  double grid_max = 1.2;
  double bandwidth = 0.05;
  Mat grid;    // grid_size x grid_size, grid(i, j) at (x_j, y_i) cell centers

  [[nodiscard]] double cell_area() const;
};

KdeExport project_2d_kde(const Mat& item_table, int grid_size, double bandwidth);
void write_kde(const KdeExport& kde, const std::filesystem::path& path);

struct GeometryReport {
  double mean_global_distance = 0.0;
  double mean_intra_sequence_distance = 0.0;
  double ratio = 0.0;
  double distance_pop = 0.0;
  double distance_cold = 0.0;
  double pop_fraction = 0.4;
};

void write_geometry_report(const GeometryReport& report, const std::filesystem::path& path);

}  // namespace unit::analysis
