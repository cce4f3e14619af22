#include "unit/model.hpp"

#include <algorithm>

namespace unit {

Model Model::init(int input_dim, const std::vector<int>& layer_dims, const seq::BackboneConfig& backbone,
                  std::uint64_t seed) {
  backbone.validate();
  if (layer_dims.empty() || layer_dims.back() != backbone.d) {
    throw Error("last projection layer must equal model.d (" + std::to_string(backbone.d) + ")");
  }
  return {repr::ProjectionMLP::init(seed, input_dim, layer_dims), seq::Backbone::init(backbone, seed)};
}

std::vector<ag::Parameter*> Model::parameters() {
  auto out = projection.parameters();
  for (auto* p : backbone.parameters()) out.push_back(p);
  return out;
}

Mat Model::item_table(const Mat& cache) const { return projection.project(cache); }

Mat Model::encode_users(const Mat& item_table, const std::vector<std::vector<int>>& prefixes, int chunk) {
  const auto& cfg = backbone.config();
  const int L = cfg.max_len;
  Mat hidden(static_cast<Eigen::Index>(prefixes.size()), cfg.d);
  for (std::size_t start = 0; start < prefixes.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(prefixes.size(), start + static_cast<std::size_t>(chunk));
    std::vector<std::vector<int>> window(prefixes.begin() + static_cast<std::ptrdiff_t>(start),
                                         prefixes.begin() + static_cast<std::ptrdiff_t>(end));
    if (cfg.kind == seq::BackboneKind::masked) {
      for (auto& w : window) w.push_back(seq::kMaskToken);
    }
    const auto batch = seq::make_batch(window, L);
    ag::Tape tape(false);
    const ag::Var reps = tape.constant(item_table);
    const ag::Var h = backbone.forward(tape, batch, reps, nullptr);
    for (std::size_t u = 0; u < window.size(); ++u) {
      hidden.row(static_cast<Eigen::Index>(start + u)) = h.value().row(static_cast<Eigen::Index>(batch.flat(static_cast<int>(u), L - 1)));
    }
  }
  return hidden;
}

}  // namespace unit
