#include "unit/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace unit::analysis {

namespace {

double row_distance(const Mat& t, int a, int b) { return (t.row(a) - t.row(b)).norm(); }

void check_rows(const Mat& t, std::span<const int> rows) {
  for (int r : rows) {
    if (r < 0 || r >= t.rows()) throw Error("item index " + std::to_string(r) + " out of range");
  }
}

}  // namespace

double mean_pairwise_distance(const Mat& item_table, std::span<const int> rows, std::size_t max_pairs, Rng& rng) {
  const std::size_t n = rows.size();
  if (n < 2) throw Error("mean pairwise distance needs at least two items");
  check_rows(item_table, rows);
  const std::size_t pairs = n * (n - 1) / 2;
  double total = 0.0;
  if (pairs <= max_pairs) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t m = j + 1; m < n; ++m) total += row_distance(item_table, rows[j], rows[m]);
    }
    return total / static_cast<double>(pairs);
  }
  for (std::size_t s = 0; s < max_pairs; ++s) {
    const auto a = uniform_below(rng, n);
    auto b = uniform_below(rng, n - 1);
    if (b >= a) ++b;
    total += row_distance(item_table, rows[a], rows[b]);
  }
  return total / static_cast<double>(max_pairs);
}

IntraSequenceResult intra_sequence_ratio(const Mat& item_table, const std::vector<std::vector<int>>& sequences,
                                         std::size_t max_pairs_per_scope, std::uint64_t seed) {
  if (item_table.rows() < 2) throw Error("intra-sequence ratio needs at least two items");
  if (max_pairs_per_scope == 0) throw Error("pair budget must be positive");
  Rng rng(derive_seed(seed, 0x696e7472ULL));

  std::vector<int> all(static_cast<std::size_t>(item_table.rows()));
  std::iota(all.begin(), all.end(), 0);
  IntraSequenceResult out;
  out.global_mean = mean_pairwise_distance(item_table, all, max_pairs_per_scope, rng);

  std::vector<std::size_t> cumulative;  // running pair count per sequence
  std::size_t total_pairs = 0;
  for (const auto& s : sequences) {
    check_rows(item_table, s);
    total_pairs += s.size() * (s.size() >= 1 ? s.size() - 1 : 0) / 2;
    cumulative.push_back(total_pairs);
  }
  if (total_pairs == 0) throw Error("no sequence has two or more items");

  double total = 0.0;
  if (total_pairs <= max_pairs_per_scope) {
    for (const auto& s : sequences) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        for (std::size_t m = j + 1; m < s.size(); ++m) total += row_distance(item_table, s[j], s[m]);
      }
    }
    out.intra_mean = total / static_cast<double>(total_pairs);
  } else {
    for (std::size_t i = 0; i < max_pairs_per_scope; ++i) {
      const auto pick = uniform_below(rng, total_pairs);
      const auto seq_idx = static_cast<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
      const auto& s = sequences[seq_idx];
      const auto a = uniform_below(rng, s.size());
      auto b = uniform_below(rng, s.size() - 1);
      if (b >= a) ++b;
      total += row_distance(item_table, s[a], s[b]);
    }
    out.intra_mean = total / static_cast<double>(max_pairs_per_scope);
  }
  out.ratio = out.global_mean > 0.0 ? out.intra_mean / out.global_mean : 0.0;
  return out;
}

PopularitySplitResult popularity_distance_split(const Mat& item_table, std::span<const std::int64_t> counts,
                                                double pop_fraction, std::size_t max_pairs, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(item_table.rows());
  if (counts.size() != n) throw Error("popularity counts differ in length from the item table");
  if (!(pop_fraction > 0.0 && pop_fraction < 1.0)) throw Error("pop_fraction must be in (0, 1)");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  const auto n_pop = static_cast<std::size_t>(std::ceil(pop_fraction * static_cast<double>(n)));
  PopularitySplitResult out;
  out.popular.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_pop, n)));
  out.cold.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_pop, n)), order.end());
  if (out.popular.size() < 2 || out.cold.size() < 2) {
    throw Error("popularity split leaves a group with fewer than two items");
  }
  Rng rng(derive_seed(seed, 0x706f7075ULL));
  out.distance_pop = mean_pairwise_distance(item_table, out.popular, max_pairs, rng);
  out.distance_cold = mean_pairwise_distance(item_table, out.cold, max_pairs, rng);
  return out;
}

Mat pca_project_2d(const Mat& item_table) {
  if (item_table.rows() < 3) throw Error("2D projection needs at least three items");
  if (item_table.cols() < 2) throw Error("2D projection needs at least two dimensions");
  const RowVec mean = item_table.colwise().mean();
  const Mat centered = item_table.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(item_table.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  const auto d = cov.rows();
  const double top = solver.eigenvalues()(d - 1);
  const double second = solver.eigenvalues()(d - 2);
  if (!(top > 0.0) || second <= 1e-12 * top) throw Error("item table has rank < 2 after centering");
  Eigen::MatrixXd dirs(d, 2);
  dirs.col(0) = solver.eigenvectors().col(d - 1);
  dirs.col(1) = solver.eigenvectors().col(d - 2);
  for (int c = 0; c < 2; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) {
      if (std::abs(dirs(r, c)) > 1e-12) {
        if (dirs(r, c) < 0.0) dirs.col(c) = -dirs.col(c);
        break;
      }
    }
  }
  return centered * dirs;
}

double KdeExport::cell_area() const {
  const double w = (grid_max - grid_min) / static_cast<double>(grid.rows());
  return w * w;
}

KdeExport project_2d_kde(const Mat& item_table, int grid_size, double bandwidth) {
  if (grid_size < 16) throw Error("KDE grid size must be >= 16");
  if (!(bandwidth > 0.0)) throw Error("KDE bandwidth must be positive");
  KdeExport out;
  out.bandwidth = bandwidth;
  out.points = pca_project_2d(item_table);
  for (Eigen::Index i = 0; i < out.points.rows(); ++i) {
    const double norm = out.points.row(i).norm();
    if (norm > 0.0) out.points.row(i) /= norm;
  }
  const auto n = out.points.rows();
  const double w = (out.grid_max - out.grid_min) / grid_size;
  // Separable Gaussian: density(x_j, y_i) = mean_p kx(p, j) * ky(p, i) / (2 pi b^2).
  Mat kx(n, grid_size);
  Mat ky(n, grid_size);
  const double inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  for (Eigen::Index p = 0; p < n; ++p) {
    for (int g = 0; g < grid_size; ++g) {
      const double c = out.grid_min + (g + 0.5) * w;
      const double dx = c - out.points(p, 0);
      const double dy = c - out.points(p, 1);
      kx(p, g) = std::exp(-dx * dx * inv2b2);
      ky(p, g) = std::exp(-dy * dy * inv2b2);
    }
  }
  const double norm = 1.0 / (2.0 * std::numbers::pi * bandwidth * bandwidth * static_cast<double>(n));
  out.grid = (ky.transpose() * kx) * norm;
  return out;
}

void write_kde(const KdeExport& kde, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  auto points = nlohmann::json::array();
  for (Eigen::Index i = 0; i < kde.points.rows(); ++i) points.push_back({kde.points(i, 0), kde.points(i, 1)});
  auto grid = nlohmann::json::array();
  for (Eigen::Index r = 0; r < kde.grid.rows(); ++r) {
    std::vector<double> row(kde.grid.row(r).data(), kde.grid.row(r).data() + kde.grid.cols());
    grid.push_back(row);
  }
  j["points"] = std::move(points);
  j["grid_min"] = kde.grid_min;
  j["grid_max"] = kde.grid_max;
  j["grid"] = std::move(grid);
  j["bandwidth"] = kde.bandwidth;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump() << "\n";
}

void write_geometry_report(const GeometryReport& r, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["mean_global_distance"] = r.mean_global_distance;
  j["mean_intra_sequence_distance"] = r.mean_intra_sequence_distance;
  j["ratio"] = r.ratio;
  j["distance_pop"] = r.distance_pop;
  j["distance_cold"] = r.distance_cold;
  j["pop_fraction"] = r.pop_fraction;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

}  // namespace unit::analysis
