#pragma once

#include <cstdint>
#include <vector>

#include "cdecf/dataset.hpp"
#include "cdecf/matrix.hpp"

namespace cdecf {

enum class Split { kValidation, kTest };

struct EvalReport {
  int k = 20;
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  std::size_t users_evaluated = 0;
  std::vector<int> per_user_rank;  // 1-based, indexed by user id
};

/// 1-based rank of `heldout` among the score vector, counting only candidate
/// items (excluded[] marks non-candidates). Ties break by ascending item
/// index: an equal-scoring candidate with a smaller index outranks the
/// held-out item.
int rank_in_scores(const std::vector<double>& item_scores,
                   std::uint32_t heldout, const std::vector<char>& excluded);

/// Full-ranking position of user u's held-out item. Candidates are all
/// items minus u's train items; for the TEST split the validation item is
/// excluded as well.
int rank_heldout(const Matrix& e_star, const InteractionDataset& dataset,
                 std::uint32_t user, Split split);

/// Recall@K and NDCG@K means over all users, single-relevant-item reduction:
/// per user, recall = [rank <= K], ndcg = 1/log2(rank+1) if rank <= K else 0.
/// Per-user work fans out across `threads` (0 = hardware concurrency);
/// results merge in user order, so the report is thread-count invariant.
EvalReport evaluate(const Matrix& e_star, const InteractionDataset& dataset,
                    int k, Split split, unsigned threads = 1);

}  // namespace cdecf
