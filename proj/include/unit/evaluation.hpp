#pragma once

// Leave-one-out ranking evaluation: HR@K and NDCG@K with a single held-out
// target per user.

#include "unit/common.hpp"
#include "unit/dataset.hpp"
#include "unit/model.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace unit::eval {

struct EvalOptions {
  int k = 20;
  bool exclude_history = true;
  int sampled_candidates = 0;  // 0 = rank the full catalog
  std::uint64_t seed = 0;      // sampled-candidate draws only
};

struct EvalReport {
  int k = 20;
  double hr = 0.0;
  double ndcg = 0.0;
  std::vector<int> per_user_ranks;
};

// Descending score, ties by ascending item index, excluded items removed.
std::vector<int> rank_full_catalog(const Vec& user_hidden, const Mat& item_table, const std::set<int>& exclude,
                                   std::optional<int> target = std::nullopt);

// 1-based rank of `target` under the same ordering rule, without sorting.
int target_rank(const Vec& scores, int target, const std::vector<std::uint8_t>& excluded);

double hr_at_k(std::span<const int> ranks, int k);
double ndcg_at_k(std::span<const int> ranks, int k);

EvalReport evaluate_leave_one_out(Model& model, const Mat& cache, const dataset::DatasetSplit& split,
                                  const EvalOptions& options);
// Same, against a precomputed item table.
EvalReport evaluate_with_table(Model& model, const Mat& item_table, const dataset::DatasetSplit& split,
                               const EvalOptions& options);

void write_report(const EvalReport& report, const std::filesystem::path& path);
void write_ranks_csv(const EvalReport& report, const dataset::DatasetSplit& split, const std::filesystem::path& path);

}  // namespace unit::eval
