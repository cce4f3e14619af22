#include "unit/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace unit::eval {

std::vector<int> rank_full_catalog(const Vec& user_hidden, const Mat& item_table, const std::set<int>& exclude,
                                   std::optional<int> target) {
  if (item_table.rows() == 0) throw Error("cannot rank an empty item table");
  if (target && exclude.contains(*target)) throw Error("target item is in the exclusion set");
  const Vec scores = item_table * user_hidden;
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(item_table.rows()));
  for (int i = 0; i < item_table.rows(); ++i) {
    if (!exclude.contains(i)) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

int target_rank(const Vec& scores, int target, const std::vector<std::uint8_t>& excluded) {
  const double st = scores(target);
  int rank = 1;
  for (int j = 0; j < scores.size(); ++j) {
    if (j == target || excluded[static_cast<std::size_t>(j)] != 0) continue;
    if (scores(j) > st || (scores(j) == st && j < target)) ++rank;
  }
  return rank;
}

double hr_at_k(std::span<const int> ranks, int k) {
  if (ranks.empty()) throw Error("hr_at_k needs at least one rank");
  std::size_t hits = 0;
  for (int r : ranks) {
    if (r < 1) throw Error("ranks are 1-based");
    hits += r <= k ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(std::span<const int> ranks, int k) {
  if (ranks.empty()) throw Error("ndcg_at_k needs at least one rank");
  double total = 0.0;
  for (int r : ranks) {
    if (r < 1) throw Error("ranks are 1-based");
    if (r <= k) total += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return total / static_cast<double>(ranks.size());
}

EvalReport evaluate_with_table(Model& model, const Mat& item_table, const dataset::DatasetSplit& split,
                               const EvalOptions& options) {
  if (split.users.empty()) throw Error("evaluation needs at least one user");
  const auto n = static_cast<int>(item_table.rows());
  std::vector<std::vector<int>> prefixes;
  prefixes.reserve(split.users.size());
  for (const auto& u : split.users) {
    if (u.target < 0 || u.target >= n) throw Error("target of user " + u.user_id + " is not in the catalog");
    prefixes.push_back(u.train);
  }
  const Mat hidden = model.encode_users(item_table, prefixes);

  EvalReport report;
  report.k = options.k;
  report.per_user_ranks.resize(split.users.size());
  std::vector<std::uint8_t> excluded(static_cast<std::size_t>(n), 0);
  for (std::size_t u = 0; u < split.users.size(); ++u) {
    const auto& user = split.users[u];
    const Vec scores = item_table * hidden.row(static_cast<Eigen::Index>(u)).transpose();
    if (options.sampled_candidates > 0) {
      // target + uniform negatives from outside the user's sequence
      std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
      for (int i : user.train) seen[static_cast<std::size_t>(i)] = 1;
      seen[static_cast<std::size_t>(user.target)] = 1;
      std::vector<int> pool;
      for (int i = 0; i < n; ++i) {
        if (seen[static_cast<std::size_t>(i)] == 0) pool.push_back(i);
      }
      Rng rng(derive_seed(options.seed, u, 0x6576616cULL));
      const int m = std::min<int>(options.sampled_candidates, static_cast<int>(pool.size()));
      for (int i = 0; i < m; ++i) {
        const auto j = static_cast<std::size_t>(i) + uniform_below(rng, pool.size() - static_cast<std::size_t>(i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      }
      const double st = scores(user.target);
      int rank = 1;
      for (int i = 0; i < m; ++i) {
        const int j = pool[static_cast<std::size_t>(i)];
        if (scores(j) > st || (scores(j) == st && j < user.target)) ++rank;
      }
      report.per_user_ranks[u] = rank;
      continue;
    }
    if (options.exclude_history) {
      for (int i : user.train) excluded[static_cast<std::size_t>(i)] = 1;
      // a re-consumed target stays rankable
      excluded[static_cast<std::size_t>(user.target)] = 0;
    }
    report.per_user_ranks[u] = target_rank(scores, user.target, excluded);
    if (options.exclude_history) {
      for (int i : user.train) excluded[static_cast<std::size_t>(i)] = 0;
    }
  }
  report.hr = hr_at_k(report.per_user_ranks, options.k);
  report.ndcg = ndcg_at_k(report.per_user_ranks, options.k);
  return report;
}

EvalReport evaluate_leave_one_out(Model& model, const Mat& cache, const dataset::DatasetSplit& split,
                                  const EvalOptions& options) {
  return evaluate_with_table(model, model.item_table(cache), split, options);
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << nlohmann::json{{"k", report.k}, {"hr", report.hr}, {"ndcg", report.ndcg}}.dump() << "\n";
}

void write_ranks_csv(const EvalReport& report, const dataset::DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << "user_id,rank\n";
  for (std::size_t u = 0; u < split.users.size() && u < report.per_user_ranks.size(); ++u) {
    out << split.users[u].user_id << "," << report.per_user_ranks[u] << "\n";
  }
}

}  // namespace unit::eval
