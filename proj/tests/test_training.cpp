#include "oracles.hpp"
#include "test_util.hpp"
#include "unit/synthetic.hpp"
#include "unit/text_encoder.hpp"
#include "unit/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace unit;
using namespace unit::train;

namespace {

seq::BackboneConfig small_backbone() {
  seq::BackboneConfig c;
  c.d = 8;
  c.max_len = 8;
  c.n_blocks = 1;
  c.n_heads = 2;
  c.dropout = 0.0;
  return c;
}

TrainingData small_data() {
  const auto gen = synth::generate({.users = 60, .items = 40, .topics = 4, .min_length = 4, .max_length = 8, .seed = 3});
  auto built = dataset::build_sequences(gen.interactions, gen.texts, 3);
  auto split = dataset::leave_one_out_split(built.sequences);
  auto pop = dataset::compute_popularity(split, built.catalog.size());
  text::TextEncoderSpec spec;
  spec.output_dim = 16;
  const Mat cache = text::encode_corpus(built.catalog, spec).to_matrix();
  return TrainingData::make(cache, std::move(split), std::move(pop));
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 16;
  c.learning_rate = 0.005;
  c.seed = 5;
  c.log_wall_time = false;
  return c;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("recommendation loss value and gradient") {
  const std::vector<double> pos = {0.3, -1.2};
  const std::vector<double> neg = {2.0, -0.5, 0.0};
  const auto r = rec_loss(pos, neg);
  double want = 0;
  for (double s : pos) want -= std::log(1.0 / (1.0 + std::exp(-s)));
  for (double s : neg) want -= std::log(1.0 - 1.0 / (1.0 + std::exp(-s)));
  CHECK(r.value == doctest::Approx(want).epsilon(1e-12));

  const double h = 1e-6;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    auto up = pos;
    auto down = pos;
    up[i] += h;
    down[i] -= h;
    CHECK(r.grad_pos[i] == doctest::Approx((rec_loss(up, neg).value - rec_loss(down, neg).value) / (2 * h)).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    auto up = neg;
    auto down = neg;
    up[i] += h;
    down[i] -= h;
    CHECK(r.grad_neg[i] == doctest::Approx((rec_loss(pos, up).value - rec_loss(pos, down).value) / (2 * h)).epsilon(1e-6));
  }
  CHECK(rec_loss(std::vector<double>{0.0}, std::vector<double>{}).value == doctest::Approx(std::log(2.0)));
}

TEST_CASE("log sigmoid stays finite at extreme scores") {
  CHECK(log_sigmoid(800.0) == 0.0);
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(std::isfinite(rec_loss(std::vector<double>{-1000.0}, std::vector<double>{1000.0}).value));
  CHECK(log_sigmoid(0.0) == doctest::Approx(-std::log(2.0)));
}

TEST_CASE("negative sampling") {
  const std::vector<int> seq = {4, 1, 4, 7};
  const auto a = sample_negatives(seq, 10, 200, 3);
  CHECK(a == sample_negatives(seq, 10, 200, 3));
  CHECK(a != sample_negatives(seq, 10, 200, 4));
  std::vector<int> hits(10, 0);
  for (int x : a) {
    CHECK(x >= 0);
    CHECK(x < 10);
    CHECK(x != 1);
    CHECK(x != 4);
    CHECK(x != 7);
    ++hits[static_cast<std::size_t>(x)];
  }
  // every eligible item is drawn at least once in 200 draws over 7 items
  for (int i : {0, 2, 3, 5, 6, 8, 9}) CHECK(hits[static_cast<std::size_t>(i)] > 0);
  CHECK_THROWS_AS(sample_negatives(std::vector<int>{0, 1, 2}, 3, 1, 1), Error);
}

TEST_CASE("adam step matches a hand computation") {
  ag::Parameter p("w", Mat::Constant(1, 2, 1.0));
  AdamState adam;
  adam.m = {Mat::Zero(1, 2)};
  adam.v = {Mat::Zero(1, 2)};
  double m = 0;
  double v = 0;
  double w = 1.0;
  const std::vector<double> grads = {0.5, -0.2, 0.1};
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    p.grad = Mat::Constant(1, 2, g);
    adam_step(adam, {&p}, 0.01);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(0.999, static_cast<double>(t)));
    w -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.value(0, 1) == doctest::Approx(w).epsilon(1e-14));
    CHECK(p.grad.isZero());
  }
  CHECK(adam.step == 3);
  AdamState empty;
  CHECK_THROWS_AS(adam_step(empty, {&p}, 0.01), Error);
}

TEST_CASE("total loss") {
  CHECK(total_loss(2.0, -1.5, 0.0) == 2.0);
  CHECK(total_loss(2.0, -1.5, 0.1) == doctest::Approx(1.85));
}

TEST_CASE("config validation") {
  auto c = quick_config(1);
  CHECK_NOTHROW(c.validate());
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = quick_config(1);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = quick_config(1);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("checkpoints round trip exactly and reject corruption") {
  testutil::TempDir dir;
  const auto data = small_data();
  auto state = init_state(16, {12, 8}, small_backbone(), 2);
  fit(state, data, quick_config(1), {});
  save_checkpoint(state, dir / "ck.bin");
  auto back = load_checkpoint(dir / "ck.bin");
  CHECK(back.epoch == 1);
  CHECK(back.adam.step == state.adam.step);
  const auto a = state.model.parameters();
  const auto b = back.model.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->value == b[i]->value);
    CHECK(state.adam.m[i] == back.adam.m[i]);
    CHECK(state.adam.v[i] == back.adam.v[i]);
  }
  save_checkpoint(back, dir / "ck2.bin");
  const std::string bytes = testutil::read_file(dir / "ck.bin");
  CHECK(bytes == testutil::read_file(dir / "ck2.bin"));

  auto load_err = [&](const std::string& content) {
    testutil::write_file(dir / "bad.bin", content);
    return error_of([&] { load_checkpoint(dir / "bad.bin"); });
  };
  std::string magic = bytes;
  magic[0] = 'X';
  CHECK(load_err(magic).find("not a checkpoint") != std::string::npos);
  std::string version = bytes;
  version[8] = 2;
  CHECK(load_err(version).find("version 2") != std::string::npos);
  CHECK(load_err(bytes.substr(0, bytes.size() - 3)).find("truncated") != std::string::npos);
  CHECK(load_err(bytes + "x").find("trailing") != std::string::npos);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.bin"), Error);
}

TEST_CASE("architecture mismatch names the field") {
  auto state = init_state(16, {12, 8}, small_backbone(), 2);
  CHECK_NOTHROW(check_compatible(state, 16, {12, 8}, small_backbone()));
  CHECK(error_of([&] { check_compatible(state, 32, {12, 8}, small_backbone()); }).find("encoder.dim") !=
        std::string::npos);
  auto other = small_backbone();
  other.n_blocks = 2;
  CHECK(!error_of([&] { check_compatible(state, 16, {12, 8}, other); }).empty());
  CHECK(!error_of([&] { check_compatible(state, 16, {10, 8}, small_backbone()); }).empty());
}

TEST_CASE("training lowers the loss") {
  const auto data = small_data();
  for (auto kind : {seq::BackboneKind::causal, seq::BackboneKind::masked}) {
    auto cfg = small_backbone();
    cfg.kind = kind;
    auto state = init_state(16, {12, 8}, cfg, 1);
    const auto log = fit(state, data, quick_config(6), {});
    REQUIRE(log.size() == 6);
    CHECK(log.back().rec_loss < log.front().rec_loss);
    for (const auto& r : log) {
      CHECK(std::isfinite(r.total_loss));
      CHECK(r.evaluated);
    }
  }
}

TEST_CASE("uniformity terms enter the total with gamma") {
  const auto data = small_data();
  uni::UniformityConfig none;
  uni::UniformityConfig zero;
  zero.strategy = uni::Strategy::general;
  zero.gamma = 0.0;
  auto s1 = init_state(16, {12, 8}, small_backbone(), 4);
  auto s2 = init_state(16, {12, 8}, small_backbone(), 4);
  const auto l1 = fit(s1, data, quick_config(2), none);
  const auto l2 = fit(s2, data, quick_config(2), zero);
  // gamma = 0 leaves the optimization identical to no uniformity term
  CHECK(l1.back().rec_loss == l2.back().rec_loss);
  CHECK(l1.back().hr_at_20 == l2.back().hr_at_20);
  CHECK(l2.back().uni_loss != 0.0);

  for (auto strat : {uni::Strategy::general, uni::Strategy::seq, uni::Strategy::pop}) {
    uni::UniformityConfig u;
    u.strategy = strat;
    u.gamma = 0.5;
    auto s = init_state(16, {12, 8}, small_backbone(), 4);
    const auto r = fit(s, data, quick_config(1), u).back();
    CHECK(r.total_loss == doctest::Approx(r.rec_loss + 0.5 * r.uni_loss).epsilon(1e-12));
  }
}

TEST_CASE("runs are reproducible and resumable") {
  testutil::TempDir dir;
  const auto data = small_data();
  uni::UniformityConfig u;
  u.strategy = uni::Strategy::seq;
  auto cfg = quick_config(3);
  cfg.eval_every = 2;
  auto a = init_state(16, {12, 8}, small_backbone(), 9);
  auto b = init_state(16, {12, 8}, small_backbone(), 9);
  const auto la = fit(a, data, cfg, u);
  const auto lb = fit(b, data, cfg, u);
  REQUIRE(la.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(log_line(la[i], false) == log_line(lb[i], false));
  CHECK(!la[0].evaluated);
  CHECK(la[1].evaluated);
  CHECK(la[2].evaluated);
  CHECK(log_line(la[0], false).find("\"wall_time_seconds\":0.0") != std::string::npos);

  // stop after 2 epochs, reload, finish: same final parameters
  auto c = init_state(16, {12, 8}, small_backbone(), 9);
  auto two = cfg;
  two.epochs = 2;
  fit(c, data, two, u);
  save_checkpoint(c, dir / "mid.bin");
  auto resumed = load_checkpoint(dir / "mid.bin");
  fit(resumed, data, cfg, u);
  const auto pa = a.model.parameters();
  const auto pr = resumed.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pr[i]->value);
}

TEST_CASE("training data checks") {
  const auto data = small_data();
  auto pop = data.popularity;
  pop.p.pop_back();
  CHECK_THROWS_AS(TrainingData::make(data.cache, data.split, pop), Error);
  auto split = data.split;
  split.users[0].train.push_back(data.n_items());
  CHECK_THROWS_AS(TrainingData::make(data.cache, split, data.popularity), Error);
}

TEST_CASE("worked loss values") {
  CHECK(rec_loss(std::vector<double>{0.0}, std::vector<double>{0.0}).value == doctest::Approx(1.386294).epsilon(1e-6));
  CHECK(rec_loss(std::vector<double>{60.0}, std::vector<double>{-60.0}).value < 1e-25);
  CHECK(total_loss(1.0, -2.0, 0.03) == doctest::Approx(0.94));
  CHECK(sample_negatives(std::vector<int>{0, 1}, 3, 5, 1) == std::vector<int>{2, 2, 2, 2, 2});
}

TEST_CASE("negatives are uniform over eligible items") {
  const std::vector<int> seen = {0, 3, 5};
  const int n = 10;
  const int draws = 10000;
  Rng rng(21);
  const auto neg = sample_negatives(seen, n, draws, rng);
  std::vector<int> hits(n, 0);
  for (int x : neg) ++hits[static_cast<std::size_t>(x)];
  const double p = 1.0 / 7.0;
  const double mean = draws * p;
  const double sd = std::sqrt(draws * p * (1 - p));
  for (int i = 0; i < n; ++i) {
    if (std::binary_search(seen.begin(), seen.end(), i)) {
      CHECK(hits[static_cast<std::size_t>(i)] == 0);
    } else {
      CHECK(std::abs(hits[static_cast<std::size_t>(i)] - mean) <= 3 * sd);
    }
  }
}

TEST_CASE("the text cache stays frozen and a changed width is named") {
  const auto data = small_data();
  const Mat before = data.cache;
  auto state = init_state(16, {12, 8}, small_backbone(), 6);
  fit(state, data, quick_config(1), {});
  CHECK(data.cache == before);
  auto wider = small_backbone();
  wider.d = 16;
  CHECK(error_of([&] { check_compatible(state, 16, {12, 8}, wider); }).find("model.d") != std::string::npos);
}
