#include "unit/representation.hpp"

#include <cmath>
#include <string>

namespace unit::repr {

ProjectionMLP ProjectionMLP::init(std::uint64_t seed, int input_dim, const std::vector<int>& layer_dims) {
  if (input_dim <= 0) throw Error("projection input_dim must be positive");
  if (layer_dims.empty()) throw Error("projection needs at least one layer");
  ProjectionMLP mlp;
  mlp.input_dim_ = input_dim;
  mlp.layer_dims_ = layer_dims;
  Rng rng(derive_seed(seed, 0x70726f6aULL));
  int fan_in = input_dim;
  for (std::size_t l = 0; l < layer_dims.size(); ++l) {
    const int fan_out = layer_dims[l];
    if (fan_out <= 0) throw Error("projection layer dims must be positive");
    const double bound = std::sqrt(6.0 / fan_in);
    Mat w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * bound;
    mlp.weights_.emplace_back("proj.w" + std::to_string(l), std::move(w));
    mlp.biases_.emplace_back("proj.b" + std::to_string(l), Mat::Zero(1, fan_out));
    fan_in = fan_out;
  }
  return mlp;
}

ag::Var ProjectionMLP::project(ag::Tape& tape, ag::Var x) {
  if (x.cols() != input_dim_) {
    throw Error("projection expects width " + std::to_string(input_dim_) + ", got " + std::to_string(x.cols()));
  }
  ag::Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ag::add_row(ag::matmul(h, tape.parameter(weights_[l])), tape.parameter(biases_[l]));
    if (l + 1 < weights_.size()) h = ag::relu(h);
  }
  return h;
}

Mat ProjectionMLP::project(const Mat& x) const {
  if (x.cols() != input_dim_) {
    throw Error("projection expects width " + std::to_string(input_dim_) + ", got " + std::to_string(x.cols()));
  }
  Mat h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Mat next = h * weights_[l].value;
    next.rowwise() += biases_[l].value.row(0);
    if (l + 1 < weights_.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

std::vector<ag::Parameter*> ProjectionMLP::parameters() {
  std::vector<ag::Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

namespace {

Mat select_rows(const Mat& cache, std::span<const int> item_indices) {
  Mat x(static_cast<Eigen::Index>(item_indices.size()), cache.cols());
  for (std::size_t i = 0; i < item_indices.size(); ++i) {
    const int idx = item_indices[i];
    if (idx < 0 || idx >= cache.rows()) throw Error("item index " + std::to_string(idx) + " out of range");
    x.row(static_cast<Eigen::Index>(i)) = cache.row(idx);
  }
  return x;
}

}  // namespace

Mat materialize_item_reps(const ProjectionMLP& mlp, const Mat& cache, std::span<const int> item_indices) {
  if (item_indices.empty()) return Mat(0, mlp.output_dim());
  return mlp.project(select_rows(cache, item_indices));
}

ag::Var materialize_item_reps(ProjectionMLP& mlp, ag::Tape& tape, const Mat& cache, std::span<const int> item_indices) {
  return mlp.project(tape, tape.constant(select_rows(cache, item_indices)));
}

}  // namespace unit::repr
