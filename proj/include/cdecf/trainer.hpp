#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cdecf/dataset.hpp"
#include "cdecf/model.hpp"
#include "cdecf/rng.hpp"

namespace cdecf {

enum class Optimizer { kAdam, kSgd };

const char* to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 1000;
  std::size_t batch_size = 2048;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int eval_every = 5;
  int early_stop_patience = 10;
  std::uint64_t seed = 42;
  // Wall-clock fields in logs break run-to-run byte identity; the
  // determinism tests turn them off.
  bool log_timing = true;
  unsigned eval_threads = 1;

  void validate() const;
};

/// Adam moment accumulators (one pair per parameter tensor) plus the shared
/// step counter. SGD keeps only the counter.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step_count = 0;

  static OptimizerState init(const ModelState& state, Optimizer opt);
};

/// Uniform BPR sampling: positive (u, i) drawn uniformly from train pairs,
/// negative j uniform over items with rejection until (u, j) is unseen
/// (at most 100 retries, then an error naming the user).
std::vector<TrainingTriple> sample_triples(const InteractionDataset& dataset,
                                           std::size_t batch_size, Rng& rng);

/// One optimizer step on a batch gradient.
void apply_gradients(ModelState& state, const ModelGrads& grads,
                     const TrainConfig& cfg, OptimizerState& opt);

struct EpochStats {
  double mean_loss = 0.0;
  double grad_norm = 0.0;  // L2 over all parameter gradients, last batch
  double seconds = 0.0;
  std::size_t batches = 0;
};

/// ceil(|train| / batch_size) optimizer steps over freshly sampled batches.
EpochStats train_epoch(ModelState& state, const InteractionDataset& dataset,
                       const PropagationOperator& op, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, OptimizerState& opt, Rng& rng);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  bool evaluated = false;
  double recall20 = 0.0;
  double ndcg20 = 0.0;
  double seconds = 0.0;

  std::string to_ndjson() const;
};

struct FitResult {
  ModelState best_state;
  double best_recall20 = -1.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<EpochLog> log;
};

/// Tracks "evaluations without improvement" for early stopping.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// Returns true if `metric` improves on the best seen so far.
  bool observe(double metric) {
    if (metric > best_) {
      best_ = metric;
      streak_ = 0;
      return true;
    }
    ++streak_;
    return false;
  }
  bool should_stop() const { return streak_ >= patience_; }
  double best() const { return best_; }

 private:
  int patience_;
  int streak_ = 0;
  double best_ = -std::numeric_limits<double>::infinity();
};

/// Full training loop: evaluates validation Recall@20 every eval_every
/// epochs, keeps the best state, stops after early_stop_patience
/// evaluations without improvement. per_epoch (optional) observes each log
/// record as it is produced (the CLI streams NDJSON through it).
FitResult fit(ModelState& state, const InteractionDataset& dataset,
              const PropagationOperator& op, const ModelConfig& mcfg,
              const TrainConfig& tcfg,
              const std::function<void(const EpochLog&)>& per_epoch = {});

}  // namespace cdecf
