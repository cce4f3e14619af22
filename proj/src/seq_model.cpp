#include "unit/seq_model.hpp"

#include <algorithm>
#include <cmath>

namespace unit::seq {

BackboneKind parse_backbone(const std::string& name) {
  if (name == "causal" || name == "sasrec") return BackboneKind::causal;
  if (name == "masked" || name == "bert4rec") return BackboneKind::masked;
  throw Error("unknown backbone '" + name + "' (expected causal|masked)");
}

std::string to_string(BackboneKind k) { return k == BackboneKind::causal ? "causal" : "masked"; }

void BackboneConfig::validate() const {
  if (d <= 0 || n_heads <= 0 || d % n_heads != 0) throw Error("model.d must be a positive multiple of model.n_heads");
  if (max_len < 2) throw Error("model.max_len must be >= 2");
  if (n_blocks < 0) throw Error("model.n_blocks must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("model.dropout must be in [0, 1)");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw Error("model.mask_rate must be in (0, 1)");
}

SequenceBatch make_batch(const std::vector<std::vector<int>>& sequences, int max_len) {
  SequenceBatch b;
  b.batch = static_cast<int>(sequences.size());
  b.length = max_len;
  const std::size_t total = static_cast<std::size_t>(b.batch) * static_cast<std::size_t>(max_len);
  b.items.assign(total, -1);
  b.valid.assign(total, 0);
  b.masked.assign(total, 0);
  for (int u = 0; u < b.batch; ++u) {
    const auto& s = sequences[static_cast<std::size_t>(u)];
    const int keep = std::min(static_cast<int>(s.size()), max_len);
    const int offset = max_len - keep;
    const std::size_t first = s.size() - static_cast<std::size_t>(keep);
    for (int i = 0; i < keep; ++i) {
      const auto f = b.flat(u, offset + i);
      const int item = s[first + static_cast<std::size_t>(i)];
      b.valid[f] = 1;
      if (item == kMaskToken) {
        b.masked[f] = 1;
      } else {
        b.items[f] = item;
      }
    }
  }
  return b;
}

MaskedSequence mask_sequence(std::span<const int> sequence, double mask_rate, std::uint64_t seed) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw Error("mask_rate must be in (0, 1)");
  MaskedSequence out;
  out.sequence.assign(sequence.begin(), sequence.end());
  if (sequence.empty()) return out;
  Rng rng(derive_seed(seed, 0x6d61736bULL));
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (sequence[i] < 0) continue;  // pad
    if (uniform_unit(rng) < mask_rate) out.positions.push_back(static_cast<int>(i));
  }
  if (out.positions.empty()) {
    for (std::size_t i = sequence.size(); i-- > 0;) {
      if (sequence[i] >= 0) {
        out.positions.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  for (int p : out.positions) out.sequence[static_cast<std::size_t>(p)] = kMaskToken;
  return out;
}

Vec score_items(const Vec& hidden, const Mat& candidate_reps) {
  if (candidate_reps.cols() != hidden.size()) throw Error("score_items dimension mismatch");
  return candidate_reps * hidden;
}

namespace {

ag::Parameter uniform_param(const std::string& name, Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * bound;
  return {name, std::move(m)};
}

ag::Parameter xavier(const std::string& name, int fan_in, int fan_out, Rng& rng) {
  return uniform_param(name, fan_in, fan_out, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

ag::Parameter zeros(const std::string& name, Eigen::Index cols) { return {name, Mat::Zero(1, cols)}; }
ag::Parameter ones(const std::string& name, Eigen::Index cols) { return {name, Mat::Ones(1, cols)}; }

ag::Var linear(ag::Tape& tape, ag::Var x, ag::Parameter& w, ag::Parameter& b) {
  return ag::add_row(ag::matmul(x, tape.parameter(w)), tape.parameter(b));
}

}  // namespace

Backbone Backbone::init(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  Backbone m;
  m.config_ = config;
  Rng rng(derive_seed(seed, 0x62626f6eULL));
  const int d = config.d;
  m.positions_ = uniform_param("seq.pos", config.max_len, d, 0.1, rng);
  if (config.kind == BackboneKind::masked) m.mask_embedding_ = uniform_param("seq.mask", 1, d, 0.1, rng);
  for (int l = 0; l < config.n_blocks; ++l) {
    const std::string p = "seq.block" + std::to_string(l) + ".";
    TransformerBlock blk;
    blk.ln1_g = ones(p + "ln1_g", d);
    blk.ln1_b = zeros(p + "ln1_b", d);
    blk.wq = xavier(p + "wq", d, d, rng);
    blk.bq = zeros(p + "bq", d);
    blk.wk = xavier(p + "wk", d, d, rng);
    blk.bk = zeros(p + "bk", d);
    blk.wv = xavier(p + "wv", d, d, rng);
    blk.bv = zeros(p + "bv", d);
    blk.wo = xavier(p + "wo", d, d, rng);
    blk.bo = zeros(p + "bo", d);
    blk.ln2_g = ones(p + "ln2_g", d);
    blk.ln2_b = zeros(p + "ln2_b", d);
    blk.w1 = xavier(p + "w1", d, d, rng);
    blk.b1 = zeros(p + "b1", d);
    blk.w2 = xavier(p + "w2", d, d, rng);
    blk.b2 = zeros(p + "b2", d);
    m.blocks_.push_back(std::move(blk));
  }
  m.final_g_ = ones("seq.final_g", d);
  m.final_b_ = zeros("seq.final_b", d);
  return m;
}

std::vector<ag::Parameter*> Backbone::parameters() {
  std::vector<ag::Parameter*> out{&positions_};
  if (config_.kind == BackboneKind::masked) out.push_back(&mask_embedding_);
  for (auto& b : blocks_) {
    for (ag::Parameter* p : {&b.ln1_g, &b.ln1_b, &b.wq, &b.bq, &b.wk, &b.bk, &b.wv, &b.bv, &b.wo, &b.bo, &b.ln2_g,
                             &b.ln2_b, &b.w1, &b.b1, &b.w2, &b.b2}) {
      out.push_back(p);
    }
  }
  out.push_back(&final_g_);
  out.push_back(&final_b_);
  return out;
}

ag::Var Backbone::dropout(ag::Tape& /*tape*/, ag::Var x, Rng* rng) const {
  if (rng == nullptr || config_.dropout <= 0.0) return x;
  const double keep = 1.0 - config_.dropout;
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = uniform_unit(*rng) < keep ? 1.0 / keep : 0.0;
  return ag::mul_const(x, mask);
}

ag::Var Backbone::forward(ag::Tape& tape, const SequenceBatch& batch, ag::Var item_reps, Rng* dropout_rng) {
  const int B = batch.batch;
  const int L = batch.length;
  const int d = config_.d;
  if (L != config_.max_len) throw Error("batch length differs from model.max_len");
  if (item_reps.cols() != d) throw Error("item representations width differs from model.d");
  const std::size_t total = static_cast<std::size_t>(B) * static_cast<std::size_t>(L);
  if (batch.items.size() != total || batch.valid.size() != total || batch.masked.size() != total) {
    throw Error("malformed sequence batch");
  }

  std::vector<int> lookup(total, -1);
  std::vector<int> pos(total);
  Mat valid_mask(static_cast<Eigen::Index>(total), d);
  bool any_masked = false;
  for (std::size_t f = 0; f < total; ++f) {
    if (batch.valid[f] != 0 && batch.masked[f] == 0) lookup[f] = batch.items[f];
    pos[f] = static_cast<int>(f % static_cast<std::size_t>(L));
    valid_mask.row(static_cast<Eigen::Index>(f)).setConstant(batch.valid[f] != 0 ? 1.0 : 0.0);
    any_masked = any_masked || (batch.valid[f] != 0 && batch.masked[f] != 0);
  }
  if (any_masked && config_.kind != BackboneKind::masked) throw Error("mask tokens need the masked backbone");

  ag::Var x = ag::gather_rows(item_reps, lookup);
  if (any_masked) {
    std::vector<std::uint8_t> where(total);
    for (std::size_t f = 0; f < total; ++f) where[f] = batch.valid[f] != 0 && batch.masked[f] != 0 ? 1 : 0;
    x = ag::replace_rows(x, tape.parameter(mask_embedding_), where);
  }
  x = ag::add(x, ag::gather_rows(tape.parameter(positions_), pos));
  x = ag::mul_const(dropout(tape, x, dropout_rng), valid_mask);

  const ag::AttentionLayout layout{B, L, config_.n_heads, config_.kind == BackboneKind::causal, batch.valid};
  for (auto& blk : blocks_) {
    ag::Var a = ag::layer_norm(x, tape.parameter(blk.ln1_g), tape.parameter(blk.ln1_b));
    ag::Var att = ag::attention(linear(tape, a, blk.wq, blk.bq), linear(tape, a, blk.wk, blk.bk),
                                linear(tape, a, blk.wv, blk.bv), layout);
    x = ag::add(x, dropout(tape, linear(tape, att, blk.wo, blk.bo), dropout_rng));
    ag::Var h = ag::layer_norm(x, tape.parameter(blk.ln2_g), tape.parameter(blk.ln2_b));
    h = linear(tape, ag::relu(linear(tape, h, blk.w1, blk.b1)), blk.w2, blk.b2);
    x = ag::mul_const(ag::add(x, dropout(tape, h, dropout_rng)), valid_mask);
  }
  x = ag::layer_norm(x, tape.parameter(final_g_), tape.parameter(final_b_));
  return ag::mul_const(x, valid_mask);
}

}  // namespace unit::seq
