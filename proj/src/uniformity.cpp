#include "unit/uniformity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace unit::uni {

Strategy parse_strategy(const std::string& name) {
  if (name == "none") return Strategy::none;
  if (name == "general") return Strategy::general;
  if (name == "seq") return Strategy::seq;
  if (name == "pop") return Strategy::pop;
  throw Error("unknown uniformity strategy '" + name + "' (expected none|general|seq|pop)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::general: return "general";
    case Strategy::seq: return "seq";
    case Strategy::pop: return "pop";
  }
  return "none";
}

void UniformityConfig::validate() const {
  if (!(t >= 0.0)) throw Error("uniformity.t must be >= 0");
  if (!(gamma >= 0.0)) throw Error("uniformity.gamma must be >= 0");
  if (!std::isfinite(lambda)) throw Error("uniformity.lambda must be finite");
  if (measure_sample < 2) throw Error("uniformity.measure_sample must be >= 2");
  if (!(measure_t >= 0.0)) throw Error("uniformity.measure_t must be >= 0");
}

double distance_sq(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("distance_sq dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = b[i] - a[i];
    s += diff * diff;
  }
  return s;
}

namespace {

// log-mean-exp over unordered pairs of `rows` with exponent
// -t * D^2 - log_w[j] - log_w[m]. Adds scale * d/d reps into `grad`.
double pairwise_log_mean_exp(const Mat& reps, std::span<const int> rows, double t, const std::vector<double>* log_w,
                             double scale, Mat& grad) {
  const std::size_t n = rows.size();
  const std::size_t pairs = n * (n - 1) / 2;
  std::vector<double> a;
  a.reserve(pairs);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    const auto rj = reps.row(rows[j]);
    for (std::size_t m = j + 1; m < n; ++m) {
      double e = -t * (reps.row(rows[m]) - rj).squaredNorm();
      if (log_w != nullptr) e = e - (*log_w)[j] - (*log_w)[m];
      a.push_back(e);
      mx = std::max(mx, e);
    }
  }
  double total = 0.0;
  for (double e : a) total += std::exp(e - mx);
  const double value = mx + std::log(total) - std::log(static_cast<double>(pairs));

  if (scale != 0.0 && t != 0.0) {
    std::size_t p = 0;
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t m = j + 1; m < n; ++m, ++p) {
        const double w = std::exp(a[p] - mx) / total;
        // d a / d e_j = -2t (e_j - e_m)
        const RowVec g = (-2.0 * t * w * scale) * (reps.row(rows[j]) - reps.row(rows[m]));
        grad.row(rows[j]) += g;
        grad.row(rows[m]) -= g;
      }
    }
  }
  return value;
}

std::vector<int> iota_rows(Eigen::Index n) {
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

double sub_sequences_into(const Mat& reps, const std::vector<std::vector<int>>& user_rows, double t, double scale,
                          Mat& grad) {
  std::size_t contributing = 0;
  for (const auto& rows : user_rows) contributing += rows.size() >= 2 ? 1 : 0;
  if (contributing == 0) throw Error("sequence uniformity needs at least one user with two or more items");
  const double inv = 1.0 / static_cast<double>(contributing);
  double total = 0.0;
  for (const auto& rows : user_rows) {
    if (rows.size() < 2) continue;
    for (int r : rows) {
      if (r < 0 || r >= reps.rows()) throw Error("sequence row index out of range");
    }
    total += pairwise_log_mean_exp(reps, rows, t, nullptr, scale * inv, grad);
  }
  return total * inv;
}

}  // namespace

LossResult loss_general(const Mat& reps, double t) {
  if (reps.rows() < 2) throw Error("uniformity loss needs at least two items");
  if (!(t >= 0.0)) throw Error("uniformity t must be >= 0");
  LossResult out{0.0, Mat::Zero(reps.rows(), reps.cols())};
  const auto rows = iota_rows(reps.rows());
  out.value = pairwise_log_mean_exp(reps, rows, t, nullptr, 1.0, out.grad);
  return out;
}

LossResult loss_sub_sequences(const Mat& reps, const std::vector<std::vector<int>>& user_rows, double t) {
  if (user_rows.empty()) throw Error("sequence uniformity needs at least one user");
  if (!(t >= 0.0)) throw Error("uniformity t must be >= 0");
  LossResult out{0.0, Mat::Zero(reps.rows(), reps.cols())};
  out.value = sub_sequences_into(reps, user_rows, t, 1.0, out.grad);
  return out;
}

MultiLossResult loss_sub_sequences(std::span<const Mat> per_user_reps, double t) {
  if (per_user_reps.empty()) throw Error("sequence uniformity needs at least one user");
  Eigen::Index total_rows = 0;
  const Eigen::Index d = per_user_reps.front().cols();
  for (const auto& m : per_user_reps) {
    if (m.cols() != d && m.rows() > 0) throw Error("per-user representations differ in width");
    total_rows += m.rows();
  }
  Mat stacked(total_rows, d);
  std::vector<std::vector<int>> user_rows;
  Eigen::Index offset = 0;
  for (const auto& m : per_user_reps) {
    std::vector<int> rows;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      stacked.row(offset + r) = m.row(r);
      rows.push_back(static_cast<int>(offset + r));
    }
    user_rows.push_back(std::move(rows));
    offset += m.rows();
  }
  const LossResult flat = loss_sub_sequences(stacked, user_rows, t);
  MultiLossResult out{flat.value, {}};
  offset = 0;
  for (const auto& m : per_user_reps) {
    out.grads.emplace_back(flat.grad.middleRows(offset, m.rows()));
    offset += m.rows();
  }
  return out;
}

LossResult loss_seq(const Mat& reps, const std::vector<std::vector<int>>& user_rows, double t, double lambda) {
  LossResult out = loss_general(reps, t);
  Mat sub_grad = Mat::Zero(reps.rows(), reps.cols());
  const double sub = sub_sequences_into(reps, user_rows, t, 1.0, sub_grad);
  out.value = out.value + lambda * sub;
  out.grad += lambda * sub_grad;
  return out;
}

LossResult loss_pop(const Mat& reps, std::span<const double> popularity, double t) {
  if (reps.rows() < 2) throw Error("uniformity loss needs at least two items");
  if (static_cast<Eigen::Index>(popularity.size()) != reps.rows()) throw Error("popularity length differs from item count");
  if (!(t >= 0.0)) throw Error("uniformity t must be >= 0");
  std::vector<double> log_p(popularity.size());
  for (std::size_t i = 0; i < popularity.size(); ++i) {
    if (!(popularity[i] > 0.0)) throw Error("popularity values must be positive");
    log_p[i] = std::log(popularity[i]);
  }
  LossResult out{0.0, Mat::Zero(reps.rows(), reps.cols())};
  const auto rows = iota_rows(reps.rows());
  out.value = pairwise_log_mean_exp(reps, rows, t, &log_p, 1.0, out.grad);
  return out;
}

std::vector<int> sample_without_replacement(int n, int count, Rng& rng) {
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  count = std::min(count, n);
  for (int i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(i) + uniform_below(rng, static_cast<std::uint64_t>(n - i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

double uniformity_metric(const Mat& item_reps, int sample_size, double measure_t, std::uint64_t seed) {
  const auto n = static_cast<int>(item_reps.rows());
  if (n < 2) throw Error("uniformity metric needs at least two items");
  if (sample_size < 2) throw Error("uniformity metric sample size must be >= 2");
  Rng rng(derive_seed(seed, 0x756e6966ULL));
  auto rows = sample_without_replacement(n, sample_size, rng);
  std::sort(rows.begin(), rows.end());
  Mat unused;  // scale 0: value only
  return pairwise_log_mean_exp(item_reps, rows, measure_t, nullptr, 0.0, unused);
}

}  // namespace unit::uni
