#include "oracles.hpp"
#include "test_util.hpp"
#include "unit/analysis.hpp"

#include <doctest.h>
#include <json.hpp>

#include <numbers>
#include <numeric>

using namespace unit;
using namespace unit::analysis;

namespace {

double naive_mean_distance(const Mat& t, const std::vector<int>& rows) {
  long double sum = 0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      sum += std::sqrt(oracle::sq_dist(t, rows[a], rows[b]));
      ++n;
    }
  }
  return static_cast<double>(sum / n);
}

// Two tight clusters far apart; sequences stay inside one cluster.
Mat clustered(int per_cluster, Rng& rng) {
  Mat t(2 * per_cluster, 8);
  const Mat noise = oracle::gaussian(rng, 2 * per_cluster, 8, 0.05);
  for (int i = 0; i < 2 * per_cluster; ++i) {
    t.row(i) = noise.row(i);
    t(i, 0) += i < per_cluster ? 3.0 : -3.0;
  }
  return t;
}

}  // namespace

TEST_CASE("pairwise distance is exact within budget and sampled beyond it") {
  Rng rng(1);
  const Mat t = oracle::gaussian(rng, 30, 5);
  std::vector<int> rows(30);
  std::iota(rows.begin(), rows.end(), 0);
  Rng r1(2);
  CHECK(mean_pairwise_distance(t, rows, 1000, r1) == doctest::Approx(naive_mean_distance(t, rows)).epsilon(1e-12));
  Rng r2(3);
  const double sampled = mean_pairwise_distance(t, rows, 300, r2);
  CHECK(sampled == doctest::Approx(naive_mean_distance(t, rows)).epsilon(0.05));
  Rng r3(1);
  CHECK_THROWS_AS(mean_pairwise_distance(t, std::vector<int>{3}, 10, r3), Error);
  CHECK_THROWS_AS(mean_pairwise_distance(t, std::vector<int>{3, 30}, 10, r3), Error);
}

TEST_CASE("planted clusters give a low intra-sequence ratio") {
  Rng rng(4);
  const Mat t = clustered(20, rng);
  std::vector<std::vector<int>> seqs;
  for (int u = 0; u < 40; ++u) {
    const int base = (u % 2) * 20;
    std::vector<int> s;
    for (int j = 0; j < 5; ++j) s.push_back(base + static_cast<int>(uniform_below(rng, 20)));
    seqs.push_back(s);
  }
  const auto r = intra_sequence_ratio(t, seqs);
  CHECK(r.ratio < 0.7);
  CHECK(r.ratio == doctest::Approx(r.intra_mean / r.global_mean));
}

TEST_CASE("random sequences sit near ratio one") {
  Rng rng(5);
  const Mat t = oracle::gaussian(rng, 200, 16);
  std::vector<std::vector<int>> seqs;
  for (int u = 0; u < 400; ++u) {
    std::vector<int> s;
    for (int j = 0; j < 6; ++j) s.push_back(static_cast<int>(uniform_below(rng, 200)));
    seqs.push_back(s);
  }
  const auto r = intra_sequence_ratio(t, seqs, kDefaultPairBudget, 9);
  CHECK(r.ratio >= 0.95);
  CHECK(r.ratio <= 1.05);
}

TEST_CASE("intra-sequence ratio is seeded and validated") {
  Rng rng(6);
  const Mat t = oracle::gaussian(rng, 50, 4);
  std::vector<std::vector<int>> seqs;
  for (int u = 0; u < 50; ++u) seqs.push_back({u, (u + 7) % 50, (u + 13) % 50});
  const auto a = intra_sequence_ratio(t, seqs, 40, 3);
  const auto b = intra_sequence_ratio(t, seqs, 40, 3);
  CHECK(a.ratio == b.ratio);
  CHECK_THROWS_AS(intra_sequence_ratio(t, {{1}, {2}}), Error);
  CHECK_THROWS_AS(intra_sequence_ratio(t, seqs, 0), Error);
}

TEST_CASE("popularity split picks the most consumed items") {
  Rng rng(7);
  const Mat t = oracle::gaussian(rng, 10, 3);
  const std::vector<std::int64_t> counts = {5, 1, 9, 0, 9, 2, 3, 3, 7, 1};
  const auto r = popularity_distance_split(t, counts, 0.4);
  // ceil(0.4 * 10) = 4: counts 9, 9, 7, 5 with ties by index
  CHECK(r.popular == std::vector<int>{2, 4, 8, 0});
  std::vector<int> all = r.popular;
  all.insert(all.end(), r.cold.begin(), r.cold.end());
  std::sort(all.begin(), all.end());
  std::vector<int> expect(10);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  CHECK(r.distance_pop == doctest::Approx(naive_mean_distance(t, r.popular)));
  CHECK(r.distance_cold == doctest::Approx(naive_mean_distance(t, r.cold)));
}

TEST_CASE("popularity split on planted geometry") {
  Rng rng(8);
  Mat t = oracle::gaussian(rng, 20, 4, 0.1);
  std::vector<std::int64_t> counts(20, 1);
  for (int i = 0; i < 8; ++i) {
    counts[static_cast<std::size_t>(i)] = 100;
    t.row(i) *= 10.0;  // popular items spread out
  }
  const auto r = popularity_distance_split(t, counts, 0.4);
  CHECK(r.distance_pop > r.distance_cold);

  const Mat same = Mat::Ones(20, 4);
  const auto z = popularity_distance_split(same, counts, 0.4);
  CHECK(z.distance_pop == 0.0);
  CHECK(z.distance_cold == 0.0);

  CHECK_THROWS_AS(popularity_distance_split(t, std::vector<std::int64_t>(19, 1)), Error);
  CHECK_THROWS_AS(popularity_distance_split(t, counts, 0.0), Error);
  CHECK_THROWS_AS(popularity_distance_split(t, counts, 1.0), Error);
  CHECK_THROWS_AS(popularity_distance_split(t, counts, 0.01), Error);
}

TEST_CASE("PCA keeps a 2D centered table up to rotation") {
  Rng rng(9);
  Mat t = oracle::gaussian(rng, 12, 2);
  t.col(0) *= 3.0;
  t.rowwise() -= t.colwise().mean();
  const Mat p = pca_project_2d(t);
  REQUIRE(p.rows() == 12);
  REQUIRE(p.cols() == 2);
  const Mat gram_in = t * t.transpose();
  const Mat gram_out = p * p.transpose();
  CHECK((gram_in - gram_out).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(p.col(0).squaredNorm() >= p.col(1).squaredNorm());

  // embedded in more dimensions with a constant offset
  Mat wide = Mat::Constant(12, 5, 2.5);
  wide.leftCols(2) += t;
  const Mat pw = pca_project_2d(wide);
  CHECK(((pw * pw.transpose()) - gram_in).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(pca_project_2d(wide) == pw);

  CHECK_THROWS_AS(pca_project_2d(Mat::Ones(2, 3)), Error);
  CHECK_THROWS_AS(pca_project_2d(Mat::Ones(5, 1)), Error);
  Mat line(5, 3);
  for (int i = 0; i < 5; ++i) line.row(i) = RowVec::Constant(3, static_cast<double>(i));
  CHECK_THROWS_AS(pca_project_2d(line), Error);
}

TEST_CASE("KDE grid integrates to one") {
  Rng rng(10);
  const Mat t = oracle::gaussian(rng, 100, 6);
  const auto kde = project_2d_kde(t, 64, 0.05);
  CHECK(kde.grid.rows() == 64);
  CHECK(kde.grid.cols() == 64);
  CHECK(kde.cell_area() == doctest::Approx(std::pow(2.4 / 64, 2)));
  CHECK(kde.grid.sum() * kde.cell_area() == doctest::Approx(1.0).epsilon(1e-3));
  for (Eigen::Index i = 0; i < kde.points.rows(); ++i) CHECK(kde.points.row(i).norm() == doctest::Approx(1.0));
  CHECK((kde.grid.array() >= 0.0).all());
}

TEST_CASE("KDE grid matches a direct kernel sum") {
  Rng rng(11);
  const Mat t = oracle::gaussian(rng, 7, 3);
  const auto kde = project_2d_kde(t, 16, 0.2);
  const double w = 2.4 / 16;
  for (int i : {0, 5, 15}) {
    for (int j : {0, 8, 13}) {
      const double x = -1.2 + (j + 0.5) * w;
      const double y = -1.2 + (i + 0.5) * w;
      long double s = 0;
      for (Eigen::Index p = 0; p < 7; ++p) {
        const double dx = x - kde.points(p, 0);
        const double dy = y - kde.points(p, 1);
        s += std::exp(-(dx * dx + dy * dy) / (2 * 0.04));
      }
      const double want = static_cast<double>(s) / (2 * std::numbers::pi * 0.04 * 7);
      CHECK(kde.grid(i, j) == doctest::Approx(want).epsilon(1e-10));
    }
  }
}

TEST_CASE("a tight cluster peaks above a ring") {
  Rng rng(12);
  const int n = 80;
  Mat ring(n, 3);
  Mat cluster(n, 3);
  const Mat noise = oracle::gaussian(rng, n, 3, 0.01);
  for (int i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * i / n;
    ring.row(i) << std::cos(a), std::sin(a), 0.0;
    // most mass in one direction, a few points elsewhere to keep rank two
    cluster.row(i) << (i < 70 ? 1.0 : std::cos(a)), (i < 70 ? 0.2 : std::sin(a)), 0.0;
    cluster.row(i) += noise.row(i);
  }
  const auto a = project_2d_kde(cluster, 64, 0.05);
  const auto b = project_2d_kde(ring, 64, 0.05);
  CHECK(a.grid.maxCoeff() > b.grid.maxCoeff());
}

TEST_CASE("KDE export files") {
  testutil::TempDir dir;
  Rng rng(13);
  const auto kde = project_2d_kde(oracle::gaussian(rng, 9, 4), 16, 0.1);
  write_kde(kde, dir / "kde.json");
  const auto j = nlohmann::json::parse(testutil::read_file(dir / "kde.json"));
  CHECK(j["grid"].size() == 16);
  CHECK(j["grid"][0].size() == 16);
  CHECK(j["points"].size() == 9);
  CHECK(j["grid_min"].get<double>() == -1.2);
  CHECK(j["bandwidth"].get<double>() == 0.1);
  CHECK_THROWS_AS(project_2d_kde(oracle::gaussian(rng, 9, 4), 15, 0.1), Error);
  CHECK_THROWS_AS(project_2d_kde(oracle::gaussian(rng, 9, 4), 16, 0.0), Error);

  write_geometry_report({1.0, 0.5, 0.5, 2.0, 1.5, 0.4}, dir / "g.json");
  const auto g = nlohmann::json::parse(testutil::read_file(dir / "g.json"));
  CHECK(g["ratio"].get<double>() == 0.5);
  CHECK(g["distance_cold"].get<double>() == 1.5);
}
