#pragma once

// Trainable projection from frozen text vectors into the d-dimensional
// recommendation space.

#include "unit/autograd.hpp"
#include "unit/common.hpp"

#include <span>
#include <vector>

namespace unit::repr {

inline const std::vector<int> kDefaultLayerDims = {1024, 1024, 512, 256, 128, 64};

class ProjectionMLP {
 public:
  ProjectionMLP() = default;

  // Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero.
  static ProjectionMLP init(std::uint64_t seed, int input_dim, const std::vector<int>& layer_dims = kDefaultLayerDims);

  [[nodiscard]] int input_dim() const { return input_dim_; }
  [[nodiscard]] int output_dim() const { return layer_dims_.empty() ? 0 : layer_dims_.back(); }
  [[nodiscard]] const std::vector<int>& layer_dims() const { return layer_dims_; }
  [[nodiscard]] std::size_t layer_count() const { return weights_.size(); }

  [[nodiscard]] const ag::Parameter& weight(std::size_t layer) const { return weights_.at(layer); }
  [[nodiscard]] const ag::Parameter& bias(std::size_t layer) const { return biases_.at(layer); }

  // ReLU between layers, linear output.
  ag::Var project(ag::Tape& tape, ag::Var x);
  [[nodiscard]] Mat project(const Mat& x) const;

  std::vector<ag::Parameter*> parameters();

 private:
  int input_dim_ = 0;
  std::vector<int> layer_dims_;
  std::vector<ag::Parameter> weights_;  // fan_in x fan_out
  std::vector<ag::Parameter> biases_;   // 1 x fan_out
};

// Projected representations of the selected cache rows, in the given order.
Mat materialize_item_reps(const ProjectionMLP& mlp, const Mat& cache, std::span<const int> item_indices);
ag::Var materialize_item_reps(ProjectionMLP& mlp, ag::Tape& tape, const Mat& cache, std::span<const int> item_indices);

}  // namespace unit::repr
