#include "unit/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <unordered_map>

namespace unit::train {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error("train.epochs must be >= 1");
  if (batch_size < 1) throw Error("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error("train.learning_rate must be > 0");
  if (negatives_per_positive < 1) throw Error("train.negatives must be >= 1");
  if (eval_every < 1) throw Error("train.eval_every must be >= 1");
  if (eval_k < 1) throw Error("train.k must be >= 1");
  if (eval_candidates < 0) throw Error("train.eval_candidates must be >= 0");
}

TrainingData TrainingData::make(Mat cache, dataset::DatasetSplit split, dataset::PopularityTable popularity) {
  TrainingData d;
  d.cache = std::move(cache);
  d.split = std::move(split);
  d.popularity = std::move(popularity);
  if (static_cast<Eigen::Index>(d.popularity.p.size()) != d.cache.rows()) {
    throw Error("popularity table size differs from the embedding cache");
  }
  for (const auto& u : d.split.users) {
    std::vector<int> s = u.train;
    s.push_back(u.target);
    for (int i : s) {
      if (i < 0 || i >= d.cache.rows()) throw Error("user " + u.user_id + " references an item outside the cache");
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    d.seen.push_back(std::move(s));
  }
  return d;
}

TrainingState init_state(int input_dim, const std::vector<int>& layer_dims, const seq::BackboneConfig& backbone,
                         std::uint64_t seed) {
  TrainingState s;
  s.model = Model::init(input_dim, layer_dims, backbone, seed);
  for (auto* p : s.model.parameters()) {
    s.adam.m.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    s.adam.v.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
  return s;
}

std::vector<int> sample_negatives(std::span<const int> seen, int n_items, int count, Rng& rng) {
  if (static_cast<std::size_t>(n_items) <= seen.size()) throw Error("no eligible negative items for this user");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    const int c = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n_items)));
    if (!std::binary_search(seen.begin(), seen.end(), c)) out.push_back(c);
  }
  return out;
}

std::vector<int> sample_negatives(std::span<const int> user_sequence, int n_items, int count, std::uint64_t seed) {
  std::vector<int> seen(user_sequence.begin(), user_sequence.end());
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  Rng rng(derive_seed(seed, 0x6e6567ULL));
  return sample_negatives(seen, n_items, count, rng);
}

double log_sigmoid(double x) { return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x)); }

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

RecLossResult rec_loss(std::span<const double> positive_scores, std::span<const double> negative_scores) {
  RecLossResult out;
  out.grad_pos.resize(positive_scores.size());
  out.grad_neg.resize(negative_scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i) {
    total -= log_sigmoid(positive_scores[i]);
    out.grad_pos[i] = -sigmoid(-positive_scores[i]);
  }
  for (std::size_t i = 0; i < negative_scores.size(); ++i) {
    total -= log_sigmoid(-negative_scores[i]);  // log(1 - sigmoid(x)) = log sigmoid(-x)
    out.grad_neg[i] = sigmoid(negative_scores[i]);
  }
  out.value = total;
  return out;
}

void adam_step(AdamState& adam, const std::vector<ag::Parameter*>& params, double learning_rate) {
  if (adam.m.size() != params.size() || adam.v.size() != params.size()) throw Error("optimizer state does not match parameters");
  ++adam.step;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    ag::Parameter& p = *params[i];
    Mat& m = adam.m[i];
    Mat& v = adam.v[i];
    m = adam.beta1 * m + (1.0 - adam.beta1) * p.grad;
    v = adam.beta2 * v + (1.0 - adam.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + adam.eps);
    p.zero_grad();
  }
}

namespace {

struct BatchLosses {
  double rec = 0.0;
  double uni = 0.0;
  double total = 0.0;
};

struct UserWindow {
  std::vector<int> inputs;        // global item ids, kMaskToken at masked positions
  std::vector<int> targets;       // aligned with inputs; -1 = no loss at that position
};

UserWindow causal_window(const std::vector<int>& prefix, int max_len) {
  UserWindow w;
  const std::size_t n = prefix.size();
  const std::size_t keep = std::min<std::size_t>(n - 1, static_cast<std::size_t>(max_len));
  const std::size_t first = n - 1 - keep;
  w.inputs.assign(prefix.begin() + static_cast<std::ptrdiff_t>(first), prefix.end() - 1);
  w.targets.assign(prefix.begin() + static_cast<std::ptrdiff_t>(first + 1), prefix.end());
  return w;
}

UserWindow masked_window(const std::vector<int>& prefix, int max_len, double mask_rate, std::uint64_t seed) {
  const std::size_t keep = std::min<std::size_t>(prefix.size(), static_cast<std::size_t>(max_len));
  std::vector<int> window(prefix.end() - static_cast<std::ptrdiff_t>(keep), prefix.end());
  auto masked = seq::mask_sequence(window, mask_rate, seed);
  UserWindow w;
  w.targets.assign(window.size(), -1);
  for (int p : masked.positions) w.targets[static_cast<std::size_t>(p)] = window[static_cast<std::size_t>(p)];
  w.inputs = std::move(masked.sequence);
  return w;
}

BatchLosses train_batch(TrainingState& state, const TrainingData& data, std::span<const int> users,
                        const TrainConfig& config, const uni::UniformityConfig& uniformity, int epoch, int batch_index) {
  const auto& bcfg = state.model.backbone.config();
  const int L = bcfg.max_len;
  const int n_items = data.n_items();

  std::vector<UserWindow> windows;
  windows.reserve(users.size());
  for (int u : users) {
    const auto& prefix = data.split.users[static_cast<std::size_t>(u)].train;
    if (bcfg.kind == seq::BackboneKind::causal) {
      windows.push_back(causal_window(prefix, L));
    } else {
      windows.push_back(masked_window(prefix, L, bcfg.mask_rate,
                                      derive_seed(config.seed, static_cast<std::uint64_t>(epoch),
                                                  static_cast<std::uint64_t>(u), 0x6d736bULL)));
    }
  }

  // Batch item set: distinct items of the batch's sequences, then negatives.
  std::vector<int> batch_items;
  for (const auto& w : windows) {
    for (int i : w.inputs) {
      if (i >= 0) batch_items.push_back(i);
    }
    for (int i : w.targets) {
      if (i >= 0) batch_items.push_back(i);
    }
  }
  std::sort(batch_items.begin(), batch_items.end());
  batch_items.erase(std::unique(batch_items.begin(), batch_items.end()), batch_items.end());

  Rng neg_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch_index),
                          0x6e6567ULL));
  std::vector<int> negatives;  // per target position, negatives_per_positive each
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const auto& seen = data.seen[static_cast<std::size_t>(users[b])];
    for (int t : windows[b].targets) {
      if (t < 0) continue;
      auto draws = sample_negatives(seen, n_items, config.negatives_per_positive, neg_rng);
      negatives.insert(negatives.end(), draws.begin(), draws.end());
    }
  }
  std::vector<int> extra;
  for (int i : negatives) {
    if (!std::binary_search(batch_items.begin(), batch_items.end(), i)) extra.push_back(i);
  }
  std::sort(extra.begin(), extra.end());
  extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
  std::vector<int> all_items = batch_items;
  all_items.insert(all_items.end(), extra.begin(), extra.end());
  std::unordered_map<int, int> local;
  for (std::size_t i = 0; i < all_items.size(); ++i) local.emplace(all_items[i], static_cast<int>(i));

  std::vector<std::vector<int>> local_windows;
  for (const auto& w : windows) {
    std::vector<int> s;
    for (int i : w.inputs) s.push_back(i >= 0 ? local.at(i) : i);
    local_windows.push_back(std::move(s));
  }
  const seq::SequenceBatch batch = seq::make_batch(local_windows, L);

  std::vector<int> hidden_rows, pos_rows, neg_hidden_rows, neg_rows;
  std::size_t neg_cursor = 0;
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const auto& tg = windows[b].targets;
    const int offset = L - static_cast<int>(tg.size());
    for (std::size_t i = 0; i < tg.size(); ++i) {
      if (tg[i] < 0) continue;
      const int row = static_cast<int>(batch.flat(static_cast<int>(b), offset + static_cast<int>(i)));
      hidden_rows.push_back(row);
      pos_rows.push_back(local.at(tg[i]));
      for (int c = 0; c < config.negatives_per_positive; ++c) {
        neg_hidden_rows.push_back(row);
        neg_rows.push_back(local.at(negatives[neg_cursor++]));
      }
    }
  }
  if (hidden_rows.empty()) throw Error("batch has no training positions");

  ag::Tape tape;
  const ag::Var reps = repr::materialize_item_reps(state.model.projection, tape, data.cache, all_items);
  Rng drop_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch_index),
                           0x64726f70ULL));
  const ag::Var hidden = state.model.backbone.forward(tape, batch, reps, &drop_rng);

  const ag::Var pos_scores = ag::rows_dot(ag::gather_rows(hidden, hidden_rows), ag::gather_rows(reps, pos_rows));
  const ag::Var neg_scores = ag::rows_dot(ag::gather_rows(hidden, neg_hidden_rows), ag::gather_rows(reps, neg_rows));
  const Mat& ps = pos_scores.value();
  const Mat& ns = neg_scores.value();
  const auto rl = rec_loss(std::span<const double>(ps.data(), static_cast<std::size_t>(ps.size())),
                           std::span<const double>(ns.data(), static_cast<std::size_t>(ns.size())));
  // Batch mean over scored positions.
  const double inv_positions = 1.0 / static_cast<double>(hidden_rows.size());
  Mat gp = Eigen::Map<const Mat>(rl.grad_pos.data(), ps.rows(), 1) * inv_positions;
  Mat gn = Eigen::Map<const Mat>(rl.grad_neg.data(), ns.rows(), 1) * inv_positions;
  double rec_pos = 0.0;
  for (Eigen::Index i = 0; i < ps.rows(); ++i) rec_pos -= log_sigmoid(ps(i, 0));
  const ag::Var rec = ag::add(ag::scalar_from(pos_scores, rec_pos * inv_positions, std::move(gp)),
                              ag::scalar_from(neg_scores, (rl.value - rec_pos) * inv_positions, std::move(gn)));

  BatchLosses out;
  out.rec = rec.scalar();
  ag::Var total = rec;
  if (uniformity.strategy != uni::Strategy::none) {
    std::vector<int> rows(batch_items.size());
    std::iota(rows.begin(), rows.end(), 0);
    const ag::Var item_set = ag::gather_rows(reps, rows);
    uni::LossResult u;
    switch (uniformity.strategy) {
      case uni::Strategy::general:
        u = uni::loss_general(item_set.value(), uniformity.t);
        break;
      case uni::Strategy::seq: {
        std::vector<std::vector<int>> user_rows;
        for (const auto& w : windows) {
          std::vector<int> r;
          for (int i : w.inputs) {
            if (i >= 0) r.push_back(local.at(i));
          }
          for (int i : w.targets) {
            if (i >= 0) r.push_back(local.at(i));
          }
          std::sort(r.begin(), r.end());
          r.erase(std::unique(r.begin(), r.end()), r.end());
          user_rows.push_back(std::move(r));
        }
        u = uni::loss_seq(item_set.value(), user_rows, uniformity.t, uniformity.lambda);
        break;
      }
      case uni::Strategy::pop: {
        std::vector<double> p;
        p.reserve(batch_items.size());
        for (int i : batch_items) p.push_back(data.popularity.p[static_cast<std::size_t>(i)]);
        u = uni::loss_pop(item_set.value(), p, uniformity.t);
        break;
      }
      case uni::Strategy::none:
        break;
    }
    out.uni = u.value;
    total = ag::add(rec, ag::scale(ag::scalar_from(item_set, u.value, std::move(u.grad)), uniformity.gamma));
  }
  out.total = total.scalar();
  if (!std::isfinite(out.total)) {
    throw Error("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index));
  }
  tape.backward(total);
  adam_step(state.adam, state.model.parameters(), config.learning_rate);
  return out;
}

}  // namespace

TrainLogRecord train_epoch(TrainingState& state, const TrainingData& data, const TrainConfig& config,
                           const uni::UniformityConfig& uniformity) {
  config.validate();
  uniformity.validate();
  if (data.split.users.empty()) throw Error("no training users");
  const auto start = std::chrono::steady_clock::now();
  const int epoch = state.epoch + 1;

  std::vector<int> order(data.split.users.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), 0, 0x73687566ULL));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_below(shuffle_rng, i)]);
  }

  TrainLogRecord rec;
  rec.epoch = epoch;
  int batches = 0;
  for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(config.batch_size));
    const auto losses = train_batch(state, data, std::span<const int>(order).subspan(s, e - s), config, uniformity,
                                    epoch, batches);
    rec.rec_loss += losses.rec;
    rec.uni_loss += losses.uni;
    rec.total_loss += losses.total;
    ++batches;
  }
  rec.rec_loss /= batches;
  rec.uni_loss /= batches;
  rec.total_loss /= batches;
  state.epoch = epoch;

  if (epoch % config.eval_every == 0 || epoch == config.epochs) {
    const Mat table = state.model.item_table(data.cache);
    eval::EvalOptions opts{config.eval_k, config.exclude_history, config.eval_candidates,
                           derive_seed(config.seed, 0x6576ULL)};
    const auto report = eval::evaluate_with_table(state.model, table, data.split, opts);
    rec.hr_at_20 = report.hr;
    rec.ndcg_at_20 = report.ndcg;
    rec.uniformity_metric = uni::uniformity_metric(table, uniformity.measure_sample, uniformity.measure_t,
                                                   derive_seed(config.seed, 0x6d656173ULL));
    rec.evaluated = true;
  }
  rec.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<TrainLogRecord> fit(TrainingState& state, const TrainingData& data, const TrainConfig& config,
                                const uni::UniformityConfig& uniformity, const EpochCallback& on_epoch) {
  std::vector<TrainLogRecord> log;
  TrainLogRecord last_eval;
  while (state.epoch < config.epochs) {
    auto rec = train_epoch(state, data, config, uniformity);
    if (rec.evaluated) {
      last_eval = rec;
    } else {
      rec.hr_at_20 = last_eval.hr_at_20;
      rec.ndcg_at_20 = last_eval.ndcg_at_20;
      rec.uniformity_metric = last_eval.uniformity_metric;
    }
    log.push_back(rec);
    if (on_epoch) on_epoch(rec, state);
  }
  return log;
}

std::string log_line(const TrainLogRecord& r, bool include_wall_time) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["rec_loss"] = r.rec_loss;
  j["uni_loss"] = r.uni_loss;
  j["total_loss"] = r.total_loss;
  j["hr_at_20"] = r.hr_at_20;
  j["ndcg_at_20"] = r.ndcg_at_20;
  j["uniformity_metric"] = r.uniformity_metric;
  j["wall_time_seconds"] = include_wall_time ? r.wall_time_seconds : 0.0;
  j["evaluated"] = r.evaluated;
  return j.dump();
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr std::string_view kCheckpointMagic = "UNITCKP1";
constexpr std::uint32_t kCheckpointVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void raw(std::string_view s) { buf_.append(s); }
  void matrix(const Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  [[nodiscard]] const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error("checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return raw(u32()); }
  void matrix(Mat& m) {
    need(static_cast<std::size_t>(m.size()) * 8);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f64();
  }
  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(TrainingState& state, const std::filesystem::path& path) {
  Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const auto& proj = state.model.projection;
  const auto& cfg = state.model.backbone.config();
  w.i32(proj.input_dim());
  w.u32(static_cast<std::uint32_t>(proj.layer_dims().size()));
  for (int dim : proj.layer_dims()) w.i32(dim);
  w.str(seq::to_string(cfg.kind));
  w.i32(cfg.d);
  w.i32(cfg.max_len);
  w.i32(cfg.n_blocks);
  w.i32(cfg.n_heads);
  w.f64(cfg.dropout);
  w.f64(cfg.mask_rate);
  w.i32(state.epoch);
  w.f64(state.adam.beta1);
  w.f64(state.adam.beta2);
  w.f64(state.adam.eps);
  w.u64(static_cast<std::uint64_t>(state.adam.step));
  const auto params = state.model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.str(params[i]->name);
    w.u32(static_cast<std::uint32_t>(params[i]->value.rows()));
    w.u32(static_cast<std::uint32_t>(params[i]->value.cols()));
    w.matrix(params[i]->value);
    w.matrix(state.adam.m[i]);
    w.matrix(state.adam.v[i]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  if (r.remaining() < kCheckpointMagic.size() || r.raw(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw Error("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                std::to_string(kCheckpointVersion) + ")");
  }
  const int input_dim = r.i32();
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) throw Error("checkpoint has an invalid projection layer count");
  std::vector<int> dims(n_layers);
  for (auto& dim : dims) dim = r.i32();
  seq::BackboneConfig cfg;
  cfg.kind = seq::parse_backbone(r.str());
  cfg.d = r.i32();
  cfg.max_len = r.i32();
  cfg.n_blocks = r.i32();
  cfg.n_heads = r.i32();
  cfg.dropout = r.f64();
  cfg.mask_rate = r.f64();
  TrainingState state = init_state(input_dim, dims, cfg, 0);
  state.epoch = r.i32();
  state.adam.beta1 = r.f64();
  state.adam.beta2 = r.f64();
  state.adam.eps = r.f64();
  state.adam.step = static_cast<std::int64_t>(r.u64());
  auto params = state.model.parameters();
  const std::uint32_t n_params = r.u32();
  if (n_params != params.size()) {
    throw Error("checkpoint holds " + std::to_string(n_params) + " parameters, architecture expects " +
                std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (name != params[i]->name || rows != params[i]->value.rows() || cols != params[i]->value.cols()) {
      throw Error("checkpoint parameter " + name + " (" + std::to_string(rows) + "x" + std::to_string(cols) +
                  ") does not match " + params[i]->name);
    }
    r.matrix(params[i]->value);
    r.matrix(state.adam.m[i]);
    r.matrix(state.adam.v[i]);
  }
  if (r.remaining() != 0) throw Error("checkpoint has trailing bytes");
  return state;
}

void check_compatible(const TrainingState& state, int input_dim, const std::vector<int>& layer_dims,
                      const seq::BackboneConfig& backbone) {
  const auto& proj = state.model.projection;
  const auto& cfg = state.model.backbone.config();
  auto mismatch = [](const std::string& field, const std::string& have, const std::string& want) {
    throw Error("checkpoint field " + field + " = " + have + " does not match configured " + want);
  };
  if (proj.input_dim() != input_dim) mismatch("encoder.dim", std::to_string(proj.input_dim()), std::to_string(input_dim));
  if (proj.layer_dims() != layer_dims) mismatch("model.layer_dims", "(checkpoint)", "(config)");
  if (cfg.d != backbone.d) mismatch("model.d", std::to_string(cfg.d), std::to_string(backbone.d));
  if (cfg.kind != backbone.kind) mismatch("model.kind", seq::to_string(cfg.kind), seq::to_string(backbone.kind));
  if (cfg.max_len != backbone.max_len) {
    mismatch("model.max_len", std::to_string(cfg.max_len), std::to_string(backbone.max_len));
  }
  if (cfg.n_blocks != backbone.n_blocks) {
    mismatch("model.n_blocks", std::to_string(cfg.n_blocks), std::to_string(backbone.n_blocks));
  }
  if (cfg.n_heads != backbone.n_heads) {
    mismatch("model.n_heads", std::to_string(cfg.n_heads), std::to_string(backbone.n_heads));
  }
}

}  // namespace unit::train
