#include <doctest.h>

#include <cmath>

#include "cdecf/evaluator.hpp"

#include "oracles.hpp"

using namespace cdecf;

TEST_CASE("rank 1 for the unique maximum, positional otherwise") {
  std::vector<double> scores = {0.1, 0.9, 0.4, 0.6};
  std::vector<char> excluded(4, 0);
  CHECK(rank_in_scores(scores, 1, excluded) == 1);
  CHECK(rank_in_scores(scores, 2, excluded) == 3);
  CHECK(rank_in_scores(scores, 0, excluded) == 4);
}

TEST_CASE("ties break by ascending item index") {
  std::vector<double> scores = {0.5, 0.5, 0.5};
  std::vector<char> excluded(3, 0);
  CHECK(rank_in_scores(scores, 0, excluded) == 1);
  CHECK(rank_in_scores(scores, 1, excluded) == 2);
  CHECK(rank_in_scores(scores, 2, excluded) == 3);
}

TEST_CASE("excluded items never count against the rank") {
  std::vector<double> scores = {9.0, 8.0, 7.0, 1.0};
  std::vector<char> excluded = {1, 0, 0, 0};
  CHECK(rank_in_scores(scores, 2, excluded) == 2);
}

TEST_CASE("rank matches the full-sort oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed * 31 + 7);
    const std::size_t items = 2 + rng.uniform_index(30);
    std::vector<double> scores(items);
    for (auto& s : scores) {
      s = rng.normal();
      if (rng.uniform_index(4) == 0) s = 0.25;  // force some exact ties
    }
    std::vector<char> excluded(items, 0);
    for (auto& e : excluded) e = rng.uniform_index(3) == 0;
    const std::uint32_t heldout =
        static_cast<std::uint32_t>(rng.uniform_index(items));
    excluded[heldout] = 0;
    CHECK(rank_in_scores(scores, heldout, excluded) ==
          oracle::rank_by_sort(scores, heldout, excluded));
  }
}

TEST_CASE("rank_heldout excludes train items, and val item under TEST") {
  // 1 user, 4 items; history: train {0}, val 1, test 2
  auto ds = oracle::dataset_from_histories(4, {{0, 1, 2}});
  Matrix e_star(5, 1);
  e_star.at(0, 0) = 1.0;  // user
  e_star.at(1, 0) = 9.0;  // item 0 (train) - big score, but excluded
  e_star.at(2, 0) = 5.0;  // item 1 (val)
  e_star.at(3, 0) = 3.0;  // item 2 (test)
  e_star.at(4, 0) = 1.0;  // item 3

  // VALIDATION: candidates {1,2,3}; val item 1 scores 5 -> rank 1
  CHECK(rank_heldout(e_star, ds, 0, Split::kValidation) == 1);
  // TEST: candidates {2,3} (val item also excluded); item 2 -> rank 1
  CHECK(rank_heldout(e_star, ds, 0, Split::kTest) == 1);

  e_star.at(3, 0) = 0.5;  // now item 3 beats it
  CHECK(rank_heldout(e_star, ds, 0, Split::kTest) == 2);
}

TEST_CASE("metric formulas at fixed ranks") {
  // 1 user; craft scores so the test item lands at a chosen rank.
  auto ds = oracle::dataset_from_histories(25, {{0, 1, 2}});
  Matrix e_star(26, 1);
  e_star.at(0, 0) = 1.0;
  // items 3.. get descending scores; item 2 (test) placed third among
  // candidates {2,3,...,24}
  e_star.at(3 + 1, 0) = 10.0;
  e_star.at(4 + 1, 0) = 9.0;
  e_star.at(2 + 1, 0) = 8.0;  // test item
  auto report = evaluate(e_star, ds, 20, Split::kTest);
  CHECK(report.per_user_rank[0] == 3);
  CHECK(report.recall_at_k == 1.0);
  CHECK(report.ndcg_at_k == 0.5);  // 1/log2(4)

  // rank 1 -> both metrics 1
  e_star.at(2 + 1, 0) = 11.0;
  report = evaluate(e_star, ds, 20, Split::kTest);
  CHECK(report.recall_at_k == 1.0);
  CHECK(report.ndcg_at_k == 1.0);

  // rank 21 with K=20 -> contributes zero. Items 23,24 tie the test item's
  // score at 0 but carry larger indices, so they rank below it.
  e_star.at(2 + 1, 0) = 0.0;
  for (int i = 3; i < 23; ++i) e_star.at(i + 1, 0) = 100.0 - i;
  report = evaluate(e_star, ds, 20, Split::kTest);
  CHECK(report.per_user_rank[0] == 21);
  CHECK(report.recall_at_k == 0.0);
  CHECK(report.ndcg_at_k == 0.0);
}

TEST_CASE("metrics are non-decreasing in K") {
  auto ds = oracle::random_dataset(8, 20, 5, 3);
  auto e_star = oracle::random_matrix(28, 6, 17);
  double prev_recall = 0.0, prev_ndcg = 0.0;
  for (int k : {1, 5, 10, 20}) {
    auto report = evaluate(e_star, ds, k, Split::kTest);
    CHECK(report.recall_at_k >= prev_recall);
    CHECK(report.ndcg_at_k >= prev_ndcg);
    prev_recall = report.recall_at_k;
    prev_ndcg = report.ndcg_at_k;
  }
}

TEST_CASE("ranks are invariant under strictly increasing score transforms") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 900);
    const std::size_t items = 3 + rng.uniform_index(20);
    std::vector<double> scores(items);
    for (auto& s : scores) s = rng.normal();
    std::vector<char> excluded(items, 0);
    const std::uint32_t heldout =
        static_cast<std::uint32_t>(rng.uniform_index(items));

    auto transformed = scores;
    for (auto& s : transformed) s = 3.0 * s + 11.0;  // strictly increasing
    CHECK(rank_in_scores(scores, heldout, excluded) ==
          rank_in_scores(transformed, heldout, excluded));

    for (auto& s : transformed) s = std::atan(s) * 2.0 + 5.0;
    CHECK(rank_in_scores(scores, heldout, excluded) ==
          rank_in_scores(transformed, heldout, excluded));
  }
}

TEST_CASE("evaluate equals the dense sort-based oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed * 13 + 1);
    const std::size_t users = 2 + rng.uniform_index(10);
    const std::size_t items = 5 + rng.uniform_index(20);
    auto ds = oracle::random_dataset(users, items, 4, seed);
    auto e_star =
        oracle::random_matrix(users + items, 1 + rng.uniform_index(6), seed + 5);

    auto report = evaluate(e_star, ds, 10, Split::kTest);
    double recall_sum = 0.0, ndcg_sum = 0.0;
    for (std::uint32_t u = 0; u < users; ++u) {
      std::vector<double> scores(items);
      for (std::uint32_t i = 0; i < items; ++i)
        scores[i] = oracle::dot(e_star.row(u), e_star.row(users + i),
                                e_star.cols);
      std::vector<char> excluded(items, 0);
      for (auto i : ds.train_items_sorted[u]) excluded[i] = 1;
      excluded[ds.validation[u]] = 1;
      excluded[ds.test[u]] = 0;
      const int rank = oracle::rank_by_sort(scores, ds.test[u], excluded);
      CHECK(report.per_user_rank[u] == rank);
      if (rank <= 10) {
        recall_sum += 1.0;
        ndcg_sum += 1.0 / std::log2(rank + 1.0);
      }
    }
    CHECK(report.recall_at_k == recall_sum / users);
    CHECK(report.ndcg_at_k == ndcg_sum / users);
  }
}

TEST_CASE("thread count does not change the report") {
  auto ds = oracle::random_dataset(12, 30, 6, 77);
  auto e_star = oracle::random_matrix(42, 8, 78);
  auto r1 = evaluate(e_star, ds, 20, Split::kTest, 1);
  auto r4 = evaluate(e_star, ds, 20, Split::kTest, 4);
  CHECK(r1.recall_at_k == r4.recall_at_k);
  CHECK(r1.ndcg_at_k == r4.ndcg_at_k);
  CHECK(r1.per_user_rank == r4.per_user_rank);
}

TEST_CASE("random embeddings score near the 20/candidates baseline") {
  // 40 items, 5-long histories -> 3 train + val excluded under TEST
  // -> 36 candidates; E[recall@20] = 20/36.
  const std::size_t users = 200, items = 40;
  const int trials = 8;
  std::vector<double> recalls;
  for (int trial = 0; trial < trials; ++trial) {
    auto ds = oracle::random_dataset(users, items, 5, 1000 + trial);
    auto e_star = oracle::random_matrix(users + items, 8, 2000 + trial);
    recalls.push_back(evaluate(e_star, ds, 20, Split::kTest).recall_at_k);
  }
  double mean = 0.0;
  for (double r : recalls) mean += r;
  mean /= trials;
  double var = 0.0;
  for (double r : recalls) var += (r - mean) * (r - mean);
  var /= (trials - 1);
  const double se = std::sqrt(var / trials);
  const double p = 20.0 / 36.0;
  CHECK(std::abs(mean - p) < 3.0 * se + 0.01);
}
