#pragma once

// Joint optimization of the sampled binary recommendation loss and a
// uniformity loss: L = L_rec + gamma * L_uni.

#include "unit/dataset.hpp"
#include "unit/evaluation.hpp"
#include "unit/model.hpp"
#include "unit/uniformity.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace unit::train {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 512;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
  int negatives_per_positive = 1;
  int eval_every = 1;
  int eval_k = 20;
  bool exclude_history = true;
  int eval_candidates = 0;
  bool log_wall_time = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct TrainLogRecord {
  int epoch = 0;
  double rec_loss = 0.0;
  double uni_loss = 0.0;
  double total_loss = 0.0;
  double hr_at_20 = 0.0;
  double ndcg_at_20 = 0.0;
  double uniformity_metric = 0.0;
  double wall_time_seconds = 0.0;
  bool evaluated = false;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Mat> m;
  std::vector<Mat> v;
};

struct TrainingState {
  Model model;
  AdamState adam;
  int epoch = 0;  // completed epochs
};

struct TrainingData {
  Mat cache;  // frozen encoder output, catalog order
  dataset::DatasetSplit split;
  dataset::PopularityTable popularity;
  // sorted distinct items of each user's full sequence (prefix + target)
  std::vector<std::vector<int>> seen;

  static TrainingData make(Mat cache, dataset::DatasetSplit split, dataset::PopularityTable popularity);
  [[nodiscard]] int n_items() const { return static_cast<int>(cache.rows()); }
};

TrainingState init_state(int input_dim, const std::vector<int>& layer_dims, const seq::BackboneConfig& backbone,
                         std::uint64_t seed);

// Uniform draws over [0, n_items) minus `seen` (sorted).
std::vector<int> sample_negatives(std::span<const int> seen, int n_items, int count, Rng& rng);
std::vector<int> sample_negatives(std::span<const int> user_sequence, int n_items, int count, std::uint64_t seed);

struct RecLossResult {
  double value = 0.0;
  std::vector<double> grad_pos;
  std::vector<double> grad_neg;
};
// -sum log sigmoid(pos) - sum log(1 - sigmoid(neg)).
RecLossResult rec_loss(std::span<const double> positive_scores, std::span<const double> negative_scores);
double log_sigmoid(double x);

inline double total_loss(double rec, double uni, double gamma) { return rec + gamma * uni; }

void adam_step(AdamState& adam, const std::vector<ag::Parameter*>& params, double learning_rate);

TrainLogRecord train_epoch(TrainingState& state, const TrainingData& data, const TrainConfig& config,
                           const uni::UniformityConfig& uniformity);

using EpochCallback = std::function<void(const TrainLogRecord&, const TrainingState&)>;
// Runs epochs state.epoch+1 .. config.epochs.
std::vector<TrainLogRecord> fit(TrainingState& state, const TrainingData& data, const TrainConfig& config,
                                const uni::UniformityConfig& uniformity, const EpochCallback& on_epoch = {});

std::string log_line(const TrainLogRecord& record, bool include_wall_time = true);

void save_checkpoint(TrainingState& state, const std::filesystem::path& path);
TrainingState load_checkpoint(const std::filesystem::path& path);

// Throws naming the first architecture field that differs.
void check_compatible(const TrainingState& state, int input_dim, const std::vector<int>& layer_dims,
                      const seq::BackboneConfig& backbone);

}  // namespace unit::train
