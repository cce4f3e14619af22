#include "test_util.hpp"
#include "unit/text_encoder.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace unit;
using namespace unit::text;
using testutil::TempDir;

namespace {

// Reference implementation of the hashing rule, written from the format
// description: FNV-1a 64 over the 8 little-endian seed bytes then the feature.
std::vector<double> reference_encode(const std::string& text, int dim, std::uint64_t seed) {
  auto fnv = [seed](const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((seed >> (8 * i)) & 0xff);
    for (unsigned char b : bytes) h = (h ^ b) * 1099511628211ULL;
    for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    return h;
  };
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  std::vector<std::string> tokens(1);
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u >= 0x80 || std::isalnum(u)) {
      tokens.back() += static_cast<char>(u < 0x80 ? std::tolower(u) : u);
    } else if (!tokens.back().empty()) {
      tokens.emplace_back();
    }
  }
  for (const auto& tok : tokens) {
    if (tok.empty()) continue;
    std::vector<std::string> feats = {"t:" + tok};
    for (std::size_t i = 0; i + 3 <= tok.size(); ++i) feats.push_back("g:" + tok.substr(i, 3));
    for (const auto& f : feats) {
      const auto h = fnv(f);
      v[h % static_cast<std::uint64_t>(dim)] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  double n = 0;
  for (double x : v) n += x * x;
  if (n == 0) {
    v[fnv("\xe2\x88\x85") % static_cast<std::uint64_t>(dim)] = 1.0;
    return v;
  }
  for (double& x : v) x /= std::sqrt(n);
  return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

EmbeddingCache random_cache(int n, int dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingCache c;
  c.n_items = static_cast<std::uint32_t>(n);
  c.dim = static_cast<std::uint32_t>(dim);
  std::normal_distribution<float> g;
  for (int i = 0; i < n * dim; ++i) c.matrix.push_back(g(rng));
  for (int i = 0; i < n; ++i) c.id_index.push_back("item-" + std::to_string(i));
  return c;
}

CacheErrorCode code_of(const std::filesystem::path& p) {
  try {
    read_cache(p);
  } catch (const CacheError& e) {
    return e.code();
  }
  FAIL("no CacheError thrown");
  return CacheErrorCode::io;
}

}  // namespace

TEST_CASE("tokenizer") {
  CHECK(tokenize("Red-Pen, BLUE ink!") == std::vector<std::string>{"red", "pen", "blue", "ink"});
  CHECK(tokenize("  ").empty());
  CHECK(tokenize("caf\xc3\xa9 au") == std::vector<std::string>{"caf\xc3\xa9", "au"});
}

TEST_CASE("hash encoding matches the reference rule") {
  for (const std::string text : {"alpha", "Toy Story (1995) Animation|Children's", "", "x", "\xe2\x88\x85 !!"}) {
    for (std::uint64_t seed : {0ULL, 17ULL, 0xdeadbeefULL}) {
      const auto got = hash_encode(text, 64, seed);
      const auto want = reference_encode(text, 64, seed);
      CHECK(got == want);
    }
  }
}

TEST_CASE("hash encoding properties") {
  const auto a = hash_encode("alpha", 256, 3);
  CHECK(a == hash_encode("alpha", 256, 3));
  double norm = 0;
  for (double x : a) norm += x * x;
  CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  const auto empty = hash_encode("", 64, 3);
  CHECK(std::count(empty.begin(), empty.end(), 1.0) == 1);
  CHECK_THROWS_AS(hash_encode("x", 7, 0), Error);
}

TEST_CASE("lexically close texts are closer than unrelated ones") {
  const int dim = 256;
  const double near = cosine(hash_encode("alpha", dim, 1), hash_encode("alphb", dim, 1));
  CHECK(near > 0.0);
  CHECK(near < 1.0);
  // mean |cosine| between unrelated random words
  Rng rng(9);
  double total = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i) {
    std::string w1, w2;
    for (int c = 0; c < 6; ++c) {
      w1 += static_cast<char>('a' + uniform_below(rng, 26));
      w2 += static_cast<char>('a' + uniform_below(rng, 26));
    }
    total += cosine(hash_encode(w1, dim, 1), hash_encode(w2, dim, 1));
  }
  CHECK(near > total / trials + 0.2);
}

TEST_CASE("corpus encoding") {
  const dataset::ItemCatalog cat({{0, "a", "red pen"}, {1, "b", "blue pen"}, {2, "c", ""}});
  TextEncoderSpec spec;
  spec.output_dim = 64;
  const auto cache = encode_corpus(cat, spec);
  CHECK(cache.n_items == 3);
  CHECK(cache.dim == 64);
  CHECK(cache.id_index == std::vector<std::string>{"a", "b", "c"});
  const Mat m = cache.to_matrix();
  for (Eigen::Index r = 0; r < 3; ++r) CHECK(m.row(r).norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(encode_corpus(cat, spec) == cache);
}

TEST_CASE("external caches are aligned to the catalog") {
  TempDir dir;
  const dataset::ItemCatalog cat({{0, "item-2", ""}, {1, "item-0", ""}});
  auto ext = random_cache(3, 8, 1);
  write_cache(ext, dir / "ext.bin");
  TextEncoderSpec spec{EncoderKind::external_cache, 8, 0, dir / "ext.bin"};
  const auto aligned = encode_corpus(cat, spec);
  CHECK(aligned.id_index == std::vector<std::string>{"item-2", "item-0"});
  const Mat m = aligned.to_matrix();
  const Mat src = ext.to_matrix();
  CHECK((m.row(0) - src.row(2).normalized()).norm() < 1e-6);
  CHECK(m.row(1).norm() == doctest::Approx(1.0).epsilon(1e-6));

  const dataset::ItemCatalog bigger({{0, "item-0", ""}, {1, "item-9", ""}});
  try {
    encode_corpus(bigger, spec);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("item-9") != std::string::npos);
  }

  spec.output_dim = 16;
  CHECK_THROWS_AS(encode_corpus(cat, spec), Error);
  spec.cache_path = dir / "nothing.bin";
  try {
    encode_corpus(cat, spec);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("supply a cache file") != std::string::npos);
  }
}

TEST_CASE("cache round trip is bit exact") {
  TempDir dir;
  auto c = random_cache(5, 16, 4);
  c.matrix[3] = -0.0f;
  c.matrix[4] = std::numeric_limits<float>::denorm_min();
  c.id_index[1] = "caf\xc3\xa9";
  write_cache(c, dir / "c.bin");
  const auto back = read_cache(dir / "c.bin");
  CHECK(back == c);
  CHECK(std::memcmp(back.matrix.data(), c.matrix.data(), c.matrix.size() * sizeof(float)) == 0);
  CHECK(testutil::read_file(dir / "c.bin").substr(0, 8) == "UNITEMB1");
}

TEST_CASE("cache error taxonomy") {
  TempDir dir;
  write_cache(random_cache(10, 4, 2), dir / "good.bin");
  const std::string good = testutil::read_file(dir / "good.bin");

  std::string bad = good;
  bad[0] = 'X';
  testutil::write_file(dir / "magic.bin", bad);
  CHECK(code_of(dir / "magic.bin") == CacheErrorCode::bad_magic);

  // header says 10 rows, payload holds 9
  testutil::write_file(dir / "short.bin", good.substr(0, 16 + 9 * 4 * 4));
  CHECK(code_of(dir / "short.bin") == CacheErrorCode::truncated);
  testutil::write_file(dir / "tiny.bin", good.substr(0, 5));
  CHECK(code_of(dir / "tiny.bin") != CacheErrorCode::io);

  testutil::write_file(dir / "trailing.bin", good + "zz");
  CHECK(code_of(dir / "trailing.bin") == CacheErrorCode::size_mismatch);

  // id count disagrees with n_items
  std::string ids = good;
  const std::size_t count_at = 16 + 10 * 4 * 4;
  ids[count_at] = 9;
  testutil::write_file(dir / "ids.bin", ids);
  CHECK(code_of(dir / "ids.bin") == CacheErrorCode::size_mismatch);

  CHECK(code_of(dir / "absent.bin") == CacheErrorCode::io);
}
