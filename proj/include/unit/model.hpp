#pragma once

#include "unit/representation.hpp"
#include "unit/seq_model.hpp"

#include <vector>

namespace unit {

// Projection head + sequence backbone; the frozen text cache lives outside.
struct Model {
  repr::ProjectionMLP projection;
  seq::Backbone backbone;

  static Model init(int input_dim, const std::vector<int>& layer_dims, const seq::BackboneConfig& backbone,
                    std::uint64_t seed);

  std::vector<ag::Parameter*> parameters();

  // Projected representations of every catalog item.
  [[nodiscard]] Mat item_table(const Mat& cache) const;

  // Hidden state used to rank the next item after each prefix: the last
  // position for the causal backbone, an appended mask token for the masked one.
  Mat encode_users(const Mat& item_table, const std::vector<std::vector<int>>& prefixes, int chunk = 256);
};

}  // namespace unit
