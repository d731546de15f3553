#include "cdecf/evaluator.hpp"

#include <cmath>
#include <thread>

#include "cdecf/errors.hpp"
#include "cdecf/kernels.hpp"

namespace cdecf {

int rank_in_scores(const std::vector<double>& item_scores,
                   std::uint32_t heldout, const std::vector<char>& excluded) {
  const double h_score = item_scores[heldout];
  int rank = 1;
  for (std::uint32_t c = 0; c < item_scores.size(); ++c) {
    if (c == heldout || excluded[c]) continue;
    if (item_scores[c] > h_score ||
        (item_scores[c] == h_score && c < heldout))
      ++rank;
  }
  return rank;
}

namespace {

int rank_one_user(const Matrix& e_star, const InteractionDataset& dataset,
                  std::uint32_t user, Split split, std::vector<double>& scores,
                  std::vector<char>& excluded) {
  const std::size_t num_items = dataset.num_items;
  const double* u_row = e_star.row(user);
  scores.resize(num_items);
  for (std::uint32_t i = 0; i < num_items; ++i)
    scores[i] = kernels::dot(u_row, e_star.row(dataset.num_users + i),
                             e_star.cols);

  excluded.assign(num_items, 0);
  for (std::uint32_t i : dataset.train_items_sorted[user]) excluded[i] = 1;
  const std::uint32_t heldout =
      split == Split::kValidation ? dataset.validation[user] : dataset.test[user];
  if (split == Split::kTest) excluded[dataset.validation[user]] = 1;
  excluded[heldout] = 0;

  return rank_in_scores(scores, heldout, excluded);
}

}  // namespace

int rank_heldout(const Matrix& e_star, const InteractionDataset& dataset,
                 std::uint32_t user, Split split) {
  if (user >= dataset.num_users) throw NumericError("user index out of range");
  std::vector<double> scores;
  std::vector<char> excluded;
  return rank_one_user(e_star, dataset, user, split, scores, excluded);
}

EvalReport evaluate(const Matrix& e_star, const InteractionDataset& dataset,
                    int k, Split split, unsigned threads) {
  const std::size_t num_users = dataset.num_users;
  if (num_users == 0) throw NumericError("evaluate: empty split");
  if (e_star.rows != dataset.num_users + dataset.num_items)
    throw NumericError("evaluate: embedding/dataset shape mismatch");

  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, num_users));

  std::vector<int> ranks(num_users, 0);
  auto worker = [&](std::uint32_t begin, std::uint32_t end) {
    std::vector<double> scores;
    std::vector<char> excluded;
    for (std::uint32_t u = begin; u < end; ++u)
      ranks[u] = rank_one_user(e_star, dataset, u, split, scores, excluded);
  };

  if (threads <= 1) {
    worker(0, static_cast<std::uint32_t>(num_users));
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (num_users + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(num_users, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, static_cast<std::uint32_t>(begin),
                        static_cast<std::uint32_t>(end));
    }
    for (auto& th : pool) th.join();
  }

  // Merge in user-index order.
  double recall_sum = 0.0, ndcg_sum = 0.0;
  for (std::size_t u = 0; u < num_users; ++u) {
    if (ranks[u] <= k) {
      recall_sum += 1.0;
      ndcg_sum += 1.0 / std::log2(static_cast<double>(ranks[u]) + 1.0);
    }
  }

  EvalReport report;
  report.k = k;
  report.users_evaluated = num_users;
  report.recall_at_k = recall_sum / static_cast<double>(num_users);
  report.ndcg_at_k = ndcg_sum / static_cast<double>(num_users);
  report.per_user_rank = std::move(ranks);
  return report;
}

}  // namespace cdecf
