#pragma once

// Seeded synthetic interaction corpus with topical item text and skewed
// item popularity. Users draw mostly from one topic, so next-item structure
// is recoverable from text alone.

#include "unit/dataset.hpp"

#include <cstdint>

namespace unit::synth {

struct SyntheticSpec {
  int users = 500;
  int items = 200;
  int topics = 10;
  int min_length = 6;
  int max_length = 14;
  double topic_affinity = 0.85;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 7;
};

struct SyntheticData {
  std::vector<dataset::Interaction> interactions;
  dataset::ItemTexts texts;
  std::vector<int> item_topic;  // by item number ("i<number>")
};

SyntheticData generate(const SyntheticSpec& spec);

}  // namespace unit::synth
