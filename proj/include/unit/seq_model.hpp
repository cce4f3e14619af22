#pragma once

// Self-attention sequence encoders over projected item representations:
// a causal (next-item) backbone and a masked bidirectional (cloze) backbone.

#include "unit/autograd.hpp"
#include "unit/common.hpp"

#include <span>
#include <string>
#include <vector>

namespace unit::seq {

enum class BackboneKind { causal, masked };

BackboneKind parse_backbone(const std::string& name);
std::string to_string(BackboneKind k);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::causal;
  int d = 64;
  int max_len = 50;
  int n_blocks = 2;
  int n_heads = 2;
  double dropout = 0.2;
  double mask_rate = 0.2;

  void validate() const;
  bool operator==(const BackboneConfig&) const = default;
};

// B x L window of item rows, left-padded. `items` index rows of the item
// representation matrix handed to forward(); entries at pad or masked
// positions are ignored.
struct SequenceBatch {
  int batch = 0;
  int length = 0;
  std::vector<int> items;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> masked;

  [[nodiscard]] std::size_t flat(int b, int pos) const {
    return static_cast<std::size_t>(b) * static_cast<std::size_t>(length) + static_cast<std::size_t>(pos);
  }
};

// Left-pads each sequence to `max_len`, keeping only the most recent
// `max_len` entries of longer ones.
SequenceBatch make_batch(const std::vector<std::vector<int>>& sequences, int max_len);

struct MaskedSequence {
  std::vector<int> sequence;    // masked positions hold kMaskToken
  std::vector<int> positions;   // ascending
};
inline constexpr int kMaskToken = -2;

MaskedSequence mask_sequence(std::span<const int> sequence, double mask_rate, std::uint64_t seed);

Vec score_items(const Vec& hidden, const Mat& candidate_reps);

struct TransformerBlock {
  ag::Parameter ln1_g, ln1_b;
  ag::Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  ag::Parameter ln2_g, ln2_b;
  ag::Parameter w1, b1, w2, b2;
};

class Backbone {
 public:
  Backbone() = default;
  static Backbone init(const BackboneConfig& config, std::uint64_t seed);

  [[nodiscard]] const BackboneConfig& config() const { return config_; }

  // Returns (batch*length) x d hidden states; pad rows are zero. Pass a
  // dropout RNG for training, nullptr for deterministic inference.
  ag::Var forward(ag::Tape& tape, const SequenceBatch& batch, ag::Var item_reps, Rng* dropout_rng);

  std::vector<ag::Parameter*> parameters();

 private:
  ag::Var dropout(ag::Tape& tape, ag::Var x, Rng* rng) const;

  BackboneConfig config_;
  ag::Parameter positions_;  // max_len x d
  ag::Parameter mask_embedding_;  // 1 x d, masked kind only
  std::vector<TransformerBlock> blocks_;
  ag::Parameter final_g_, final_b_;
};

}  // namespace unit::seq
