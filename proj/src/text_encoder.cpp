#include "unit/text_encoder.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace unit::text {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (c >= 0x80 || std::isalnum(c) != 0) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t feature_hash(std::string_view feature, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto step = [&h](unsigned char b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int i = 0; i < 8; ++i) step(static_cast<unsigned char>(seed >> (8 * i)));
  for (unsigned char b : feature) step(b);
  return h;
}

std::vector<double> hash_encode(std::string_view text, int dim, std::uint64_t seed) {
  if (dim < 8) throw Error("hash encoder dim must be >= 8");
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  auto add = [&](const std::string& feature) {
    const std::uint64_t h = feature_hash(feature, seed);
    v[h % static_cast<std::uint64_t>(dim)] += (h >> 63) != 0 ? -1.0 : 1.0;
  };
  for (const auto& tok : tokenize(text)) {
    add("t:" + tok);
    for (std::size_t i = 0; i + 3 <= tok.size(); ++i) add("g:" + tok.substr(i, 3));
  }
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq == 0.0) {
    v[feature_hash("\xe2\x88\x85", seed) % static_cast<std::uint64_t>(dim)] = 1.0;  // U+2205
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return v;
}

Mat EmbeddingCache::to_matrix() const {
  Mat m(n_items, dim);
  for (std::uint32_t r = 0; r < n_items; ++r) {
    for (std::uint32_t c = 0; c < dim; ++c) m(r, c) = static_cast<double>(matrix[std::size_t{r} * dim + c]);
  }
  return m;
}

namespace {

void normalize_row(float* row, std::uint32_t dim, const std::string& id) {
  double norm_sq = 0.0;
  for (std::uint32_t c = 0; c < dim; ++c) norm_sq += static_cast<double>(row[c]) * row[c];
  if (!(norm_sq > 0.0) || !std::isfinite(norm_sq)) throw Error("embedding for item " + id + " has zero or non-finite norm");
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (std::uint32_t c = 0; c < dim; ++c) row[c] = static_cast<float>(row[c] * inv);
}

}  // namespace

EmbeddingCache align_to_catalog(const EmbeddingCache& external, const dataset::ItemCatalog& catalog) {
  std::map<std::string, std::size_t> rows;
  for (std::size_t r = 0; r < external.id_index.size(); ++r) rows.emplace(external.id_index[r], r);
  EmbeddingCache out;
  out.n_items = static_cast<std::uint32_t>(catalog.size());
  out.dim = external.dim;
  out.matrix.resize(std::size_t{out.n_items} * out.dim);
  for (const auto& item : catalog.items()) {
    auto it = rows.find(item.external_id);
    if (it == rows.end()) throw Error("embedding cache has no row for catalog item " + item.external_id);
    float* dst = out.matrix.data() + static_cast<std::size_t>(item.index) * out.dim;
    std::copy_n(external.row(it->second), out.dim, dst);
    normalize_row(dst, out.dim, item.external_id);
    out.id_index.push_back(item.external_id);
  }
  return out;
}

EmbeddingCache encode_corpus(const dataset::ItemCatalog& catalog, const TextEncoderSpec& spec) {
  if (catalog.empty()) throw Error("cannot encode an empty catalog");
  if (spec.kind == EncoderKind::external_cache) {
    if (spec.cache_path.empty() || !std::filesystem::exists(spec.cache_path)) {
      throw Error("external encoder selected but no embedding cache found at '" + spec.cache_path.string() +
                  "'; supply a cache file produced by your text encoder (encoder.cache)");
    }
    auto aligned = align_to_catalog(read_cache(spec.cache_path), catalog);
    if (static_cast<int>(aligned.dim) != spec.output_dim) {
      throw Error("embedding cache dim " + std::to_string(aligned.dim) + " does not match encoder.dim " +
                  std::to_string(spec.output_dim));
    }
    return aligned;
  }
  EmbeddingCache cache;
  cache.n_items = static_cast<std::uint32_t>(catalog.size());
  cache.dim = static_cast<std::uint32_t>(spec.output_dim);
  cache.matrix.reserve(std::size_t{cache.n_items} * cache.dim);
  for (const auto& item : catalog.items()) {
    for (double x : hash_encode(item.description, spec.output_dim, spec.hash_seed)) {
      cache.matrix.push_back(static_cast<float>(x));
    }
    cache.id_index.push_back(item.external_id);
  }
  return cache;
}

// ---------------------------------------------------------------- file format

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n) throw CacheError(CacheErrorCode::truncated, std::string("truncated cache: ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{static_cast<unsigned char>(data_[pos_ + i])} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_cache(const EmbeddingCache& cache, const std::filesystem::path& path) {
  if (cache.matrix.size() != std::size_t{cache.n_items} * cache.dim || cache.id_index.size() != cache.n_items) {
    throw CacheError(CacheErrorCode::size_mismatch, "cache shape is inconsistent with its payload");
  }
  std::string buf(kCacheMagic);
  put_u32(buf, cache.n_items);
  put_u32(buf, cache.dim);
  for (float f : cache.matrix) put_u32(buf, std::bit_cast<std::uint32_t>(f));
  put_u32(buf, static_cast<std::uint32_t>(cache.id_index.size()));
  for (const auto& id : cache.id_index) {
    put_u32(buf, static_cast<std::uint32_t>(id.size()));
    buf += id;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CacheError(CacheErrorCode::io, "cannot write cache " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CacheError(CacheErrorCode::io, "failed writing cache " + path.string());
}

EmbeddingCache read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CacheError(CacheErrorCode::io, "cannot open cache " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));

  if (r.remaining() < kCacheMagic.size() || r.bytes(kCacheMagic.size(), "magic") != kCacheMagic) {
    throw CacheError(CacheErrorCode::bad_magic, "bad magic in cache " + path.string());
  }
  EmbeddingCache cache;
  cache.n_items = r.u32("n_items");
  cache.dim = r.u32("dim");
  const std::size_t count = std::size_t{cache.n_items} * cache.dim;
  r.need(count * 4, "matrix payload shorter than n_items x dim");
  cache.matrix.resize(count);
  for (auto& f : cache.matrix) f = std::bit_cast<float>(r.u32("matrix"));
  const std::uint32_t n_ids = r.u32("id count");
  if (n_ids != cache.n_items) {
    throw CacheError(CacheErrorCode::size_mismatch,
                     "id_index has " + std::to_string(n_ids) + " entries for " + std::to_string(cache.n_items) + " rows");
  }
  for (std::uint32_t i = 0; i < n_ids; ++i) {
    const std::uint32_t len = r.u32("id length");
    cache.id_index.push_back(r.bytes(len, "id bytes"));
  }
  if (r.remaining() != 0) {
    throw CacheError(CacheErrorCode::size_mismatch, std::to_string(r.remaining()) + " trailing bytes after cache payload");
  }
  return cache;
}

}  // namespace unit::text
