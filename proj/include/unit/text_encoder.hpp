#pragma once

// Frozen text-vector stage: a deterministic hash-feature encoder, an adapter
// for externally produced embedding caches, and the binary cache format.

#include "unit/common.hpp"
#include "unit/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace unit::text {

enum class EncoderKind { external_cache, hash_features };

struct TextEncoderSpec {
  EncoderKind kind = EncoderKind::hash_features;
  int output_dim = 768;
  std::uint64_t hash_seed = 0;
  std::filesystem::path cache_path;  // external_cache only
};

struct EmbeddingCache {
  std::uint32_t n_items = 0;
  std::uint32_t dim = 0;
  std::vector<float> matrix;  // row-major n_items x dim
  std::vector<std::string> id_index;

  [[nodiscard]] const float* row(std::size_t r) const { return matrix.data() + r * dim; }
  // Copies the rows into a double matrix for the trainable stages.
  [[nodiscard]] Mat to_matrix() const;

  bool operator==(const EmbeddingCache&) const = default;
};

enum class CacheErrorCode { io, bad_magic, truncated, size_mismatch };

class CacheError : public Error {
 public:
  CacheError(CacheErrorCode code, const std::string& what) : Error(what), code_(code) {}
  [[nodiscard]] CacheErrorCode code() const { return code_; }

 private:
  CacheErrorCode code_;
};

inline constexpr std::string_view kCacheMagic = "UNITEMB1";

// Lowercased tokens split on non-alphanumeric ASCII; bytes >= 0x80 stay inside tokens.
std::vector<std::string> tokenize(std::string_view text);

// 64-bit FNV-1a over the seed bytes followed by the feature bytes.
std::uint64_t feature_hash(std::string_view feature, std::uint64_t seed);

std::vector<double> hash_encode(std::string_view text, int dim, std::uint64_t seed);

EmbeddingCache encode_corpus(const dataset::ItemCatalog& catalog, const TextEncoderSpec& spec);

// Reorders an externally produced cache to catalog order; every catalog id must be present.
EmbeddingCache align_to_catalog(const EmbeddingCache& external, const dataset::ItemCatalog& catalog);

void write_cache(const EmbeddingCache& cache, const std::filesystem::path& path);
EmbeddingCache read_cache(const std::filesystem::path& path);

}  // namespace unit::text
