#include "unit/synthetic.hpp"

#include "unit/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace unit::synth {

namespace {

std::string random_word(Rng& rng, int length) {
  static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyz";
  std::string w;
  for (int i = 0; i < length; ++i) w.push_back(kLetters[uniform_below(rng, kLetters.size())]);
  return w;
}

int draw_weighted(const std::vector<double>& cumulative, Rng& rng) {
  const double x = uniform_unit(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), x);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                   static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
}

}  // namespace

SyntheticData generate(const SyntheticSpec& spec) {
  if (spec.items < spec.topics || spec.topics < 1) throw Error("synthetic corpus needs at least one item per topic");
  if (spec.min_length < 3 || spec.max_length < spec.min_length) throw Error("invalid synthetic sequence lengths");
  if (spec.max_length >= spec.items / spec.topics) throw Error("synthetic sequences must be shorter than a topic");
  Rng rng(derive_seed(spec.seed, 0x73796eULL));

  SyntheticData out;
  std::vector<std::vector<std::string>> topic_words(static_cast<std::size_t>(spec.topics));
  for (auto& words : topic_words) {
    for (int w = 0; w < 3; ++w) words.push_back(random_word(rng, 6));
  }

  // Items are dealt round-robin to topics; within a topic, Zipf weights by rank.
  std::vector<std::vector<int>> topic_items(static_cast<std::size_t>(spec.topics));
  out.item_topic.resize(static_cast<std::size_t>(spec.items));
  for (int i = 0; i < spec.items; ++i) {
    const int topic = i % spec.topics;
    out.item_topic[static_cast<std::size_t>(i)] = topic;
    topic_items[static_cast<std::size_t>(topic)].push_back(i);
    const auto& tw = topic_words[static_cast<std::size_t>(topic)];
    out.texts["i" + std::to_string(i)] = tw[0] + " " + tw[1] + " " + tw[2] + " " + random_word(rng, 5) + " " +
                                         random_word(rng, 7);
  }
  std::vector<std::vector<double>> topic_cdf(static_cast<std::size_t>(spec.topics));
  for (int t = 0; t < spec.topics; ++t) {
    double acc = 0.0;
    for (std::size_t r = 0; r < topic_items[static_cast<std::size_t>(t)].size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
      topic_cdf[static_cast<std::size_t>(t)].push_back(acc);
    }
  }

  std::int64_t clock = 1'000'000;
  for (int u = 0; u < spec.users; ++u) {
    const int topic = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(spec.topics)));
    const int length = spec.min_length +
                       static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(spec.max_length - spec.min_length + 1)));
    std::unordered_set<int> used;
    const std::string user = "u" + std::to_string(u);
    while (static_cast<int>(used.size()) < length) {
      int t = topic;
      if (uniform_unit(rng) >= spec.topic_affinity) {
        t = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(spec.topics)));
      }
      const auto& items = topic_items[static_cast<std::size_t>(t)];
      const int item = items[static_cast<std::size_t>(draw_weighted(topic_cdf[static_cast<std::size_t>(t)], rng))];
      if (!used.insert(item).second) continue;
      out.interactions.push_back({user, "i" + std::to_string(item), clock++});
    }
  }
  return out;
}

}  // namespace unit::synth
