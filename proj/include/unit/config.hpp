#pragma once

// Experiment configuration: a flat TOML-style document with dotted sections
// (dataset.*, encoder.*, model.*, train.*, uniformity.*, analysis.*, sweep.*).
// Unknown keys are rejected.

#include "unit/seq_model.hpp"
#include "unit/text_encoder.hpp"
#include "unit/training.hpp"
#include "unit/uniformity.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace unit::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DatasetConfig {
  std::string format = "jsonl";  // jsonl | movielens
  std::string interactions;
  std::string items;
  std::string ratings;
  std::string movies;
  std::string prepared;  // ingest output directory
  int min_seq_len = 3;
  double popularity_floor = 0.01;

  bool operator==(const DatasetConfig&) const = default;
};

struct EncoderConfig {
  std::string kind = "hash";  // hash | external
  int dim = 768;
  std::uint64_t seed = 0;
  std::string cache;

  bool operator==(const EncoderConfig&) const = default;
};

struct AnalysisConfig {
  std::size_t max_pairs = 200000;
  double pop_fraction = 0.4;
  int kde_grid = 64;
  double kde_bandwidth = 0.05;

  bool operator==(const AnalysisConfig&) const = default;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  EncoderConfig encoder;
  std::vector<int> layer_dims = {1024, 1024, 512, 256, 128, 64};
  seq::BackboneConfig model;
  train::TrainConfig train;
  uni::UniformityConfig uniformity;
  AnalysisConfig analysis;
  std::vector<double> sweep_gammas = {0.005, 0.01, 0.03, 0.05, 0.1, 0.5, 5.0};
  std::uint64_t seed = 0;
  std::string out = "out";

  void validate() const;
  [[nodiscard]] text::TextEncoderSpec encoder_spec() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load(const std::filesystem::path& path);
// Applies `key = value` (dotted key) on top of an existing config.
void set_value(ExperimentConfig& config, const std::string& key, const std::string& value_text);
std::string serialize(const ExperimentConfig& config);

}  // namespace unit::config
