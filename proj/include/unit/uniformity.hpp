#pragma once

// Pairwise Gaussian-potential uniformity losses over item representations.
//
// Every loss is a log-mean-exp over unordered item pairs of
//   exp(-t * ||e_m - e_j||^2)            (general, per-sequence)
//   exp(-t * ||e_m - e_j||^2) / (p_j p_m) (popularity-weighted)
// evaluated as log-sum-exp minus log(#pairs). Lower is more uniform; every
// value is <= 0 for unit popularity. Gradients are analytic.

#include "unit/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace unit::uni {

enum class Strategy { none, general, seq, pop };

Strategy parse_strategy(const std::string& name);
std::string to_string(Strategy s);

struct UniformityConfig {
  Strategy strategy = Strategy::none;
  double t = 1.0;
  double lambda = -0.5;
  double gamma = 0.03;
  int measure_sample = 2000;
  double measure_t = 1.0;

  void validate() const;
  bool operator==(const UniformityConfig&) const = default;
};

struct LossResult {
  double value = 0.0;
  Mat grad;  // d loss / d reps, same shape as the input reps
};

double distance_sq(std::span<const double> a, std::span<const double> b);

LossResult loss_general(const Mat& reps, double t);

// Mean over users with >= 2 rows of each user's within-sequence log-mean-exp.
// `user_rows` index rows of `reps`.
LossResult loss_sub_sequences(const Mat& reps, const std::vector<std::vector<int>>& user_rows, double t);

struct MultiLossResult {
  double value = 0.0;
  std::vector<Mat> grads;  // one per input matrix
};
MultiLossResult loss_sub_sequences(std::span<const Mat> per_user_reps, double t);

// loss_general(reps) + lambda * loss_sub_sequences(reps, user_rows).
LossResult loss_seq(const Mat& reps, const std::vector<std::vector<int>>& user_rows, double t, double lambda);

LossResult loss_pop(const Mat& reps, std::span<const double> popularity, double t);

// loss_general over min(sample_size, n) rows drawn without replacement; no gradient.
double uniformity_metric(const Mat& item_reps, int sample_size, double measure_t, std::uint64_t seed);

// Distinct indices drawn uniformly without replacement, in draw order.
std::vector<int> sample_without_replacement(int n, int count, Rng& rng);

}  // namespace unit::uni
