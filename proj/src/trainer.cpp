#include "cdecf/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "cdecf/errors.hpp"
#include "cdecf/evaluator.hpp"
#include "cdecf/kernels.hpp"

namespace cdecf {

const char* to_string(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "sgd";
}

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "sgd") return Optimizer::kSgd;
  throw ConfigError("unknown optimizer: " + s + " (expected adam|sgd)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
}

namespace {

/// Parameter tensors of a model, in a fixed order shared by the optimizer
/// state and gradient application.
struct ParamView {
  double* data;
  const double* grad;
  std::size_t n;
};

std::vector<ParamView> param_views(ModelState& state, const ModelGrads& grads) {
  std::vector<ParamView> views;
  views.push_back({state.e0.data.data(), grads.e0.data.data(), state.e0.size()});
  if (state.controller) {
    auto& c = *state.controller;
    const auto& g = *grads.controller;
    views.push_back({c.w1.data(), g.w1.data(), c.w1.size()});
    views.push_back({c.b1.data(), g.b1.data(), c.b1.size()});
    views.push_back({c.w2.data(), g.w2.data(), c.w2.size()});
    views.push_back({&c.b2, &g.b2, 1});
  }
  if (!state.discrete_weight.empty()) {
    views.push_back({state.discrete_weight.data(),
                     grads.discrete_weight.data(),
                     state.discrete_weight.size()});
  }
  return views;
}

}  // namespace

OptimizerState OptimizerState::init(const ModelState& state, Optimizer opt) {
  OptimizerState os;
  if (opt == Optimizer::kAdam) {
    ModelGrads dummy = ModelGrads::zeros_like(state);
    auto views = param_views(const_cast<ModelState&>(state), dummy);
    for (const auto& v : views) {
      os.m.emplace_back(v.n, 0.0);
      os.v.emplace_back(v.n, 0.0);
    }
  }
  return os;
}

std::vector<TrainingTriple> sample_triples(const InteractionDataset& dataset,
                                           std::size_t batch_size, Rng& rng) {
  if (dataset.train.empty())
    throw DataError("cannot sample triples: train split is empty");

  std::vector<TrainingTriple> batch;
  batch.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const auto& [u, i] = dataset.train[rng.uniform_index(dataset.train.size())];
    std::uint32_t j = 0;
    bool found = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      j = static_cast<std::uint32_t>(rng.uniform_index(dataset.num_items));
      if (!dataset.user_has_train_item(u, j)) {
        found = true;
        break;
      }
    }
    if (!found)
      throw DataError("negative sampling exhausted retries for user " +
                      dataset.user_keys[u] + " (interacts with nearly all items)");
    batch.push_back({u, i, j});
  }
  return batch;
}

void apply_gradients(ModelState& state, const ModelGrads& grads,
                     const TrainConfig& cfg, OptimizerState& opt) {
  auto views = param_views(state, grads);
  ++opt.step_count;
  if (cfg.optimizer == Optimizer::kSgd) {
    for (auto& v : views) kernels::axpy(-cfg.learning_rate, v.grad, v.data, v.n);
    return;
  }
  if (opt.m.size() != views.size())
    throw NumericError("optimizer state does not match model parameters");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step_count));
  for (std::size_t p = 0; p < views.size(); ++p) {
    kernels::adam_update(views[p].data, views[p].grad, opt.m[p].data(),
                         opt.v[p].data(), views[p].n, cfg.learning_rate,
                         cfg.beta1, cfg.beta2, cfg.eps, bc1, bc2);
  }
}

namespace {

bool grads_finite(const ModelGrads& grads) {
  if (!all_finite(grads.e0)) return false;
  auto vec_finite = [](const std::vector<double>& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (grads.controller) {
    const auto& c = *grads.controller;
    if (!vec_finite(c.w1) || !vec_finite(c.b1) || !vec_finite(c.w2) ||
        !std::isfinite(c.b2))
      return false;
  }
  return vec_finite(grads.discrete_weight);
}

double grad_norm(const ModelGrads& grads) {
  double ss = kernels::sum_squares(grads.e0.data.data(), grads.e0.size());
  if (grads.controller) {
    const auto& c = *grads.controller;
    ss += kernels::sum_squares(c.w1.data(), c.w1.size());
    ss += kernels::sum_squares(c.b1.data(), c.b1.size());
    ss += kernels::sum_squares(c.w2.data(), c.w2.size());
    ss += c.b2 * c.b2;
  }
  if (!grads.discrete_weight.empty())
    ss += kernels::sum_squares(grads.discrete_weight.data(),
                               grads.discrete_weight.size());
  return std::sqrt(ss);
}

void check_params_finite(const ModelState& state) {
  if (!all_finite(state.e0))
    throw NumericError("non-finite embeddings after optimizer step");
}

}  // namespace

EpochStats train_epoch(ModelState& state, const InteractionDataset& dataset,
                       const PropagationOperator& op, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, OptimizerState& opt, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();

  const std::size_t batches =
      (dataset.train.size() + tcfg.batch_size - 1) / tcfg.batch_size;

  EpochStats stats;
  stats.batches = batches;
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    const auto batch = sample_triples(dataset, tcfg.batch_size, rng);
    ForwardResult fwd = forward(state, op, mcfg);
    BprResult bpr = bpr_loss(fwd.e_star, state.num_users, batch, state.e0,
                             mcfg.l2_lambda);
    ModelGrads grads =
        backward_through_solver(state, op, mcfg, fwd.trace, bpr.grad_e_star);
    kernels::axpy(1.0, bpr.grad_e0.data.data(), grads.e0.data.data(),
                  grads.e0.size());

    if (!grads_finite(grads))
      throw NumericError("non-finite gradient in batch " + std::to_string(b) +
                         " (loss " + std::to_string(bpr.loss) + ")");
    loss_sum += bpr.loss;
    if (b + 1 == batches) stats.grad_norm = grad_norm(grads);
    apply_gradients(state, grads, tcfg, opt);
  }
  check_params_finite(state);

  stats.mean_loss = loss_sum / static_cast<double>(batches);
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return stats;
}

std::string EpochLog::to_ndjson() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"epoch\":" << epoch << ",\"loss\":" << loss;
  if (evaluated) {
    out << ",\"recall20\":" << recall20 << ",\"ndcg20\":" << ndcg20;
  } else {
    out << ",\"recall20\":null,\"ndcg20\":null";
  }
  out << ",\"seconds\":" << seconds << "}";
  return out.str();
}

FitResult fit(ModelState& state, const InteractionDataset& dataset,
              const PropagationOperator& op, const ModelConfig& mcfg,
              const TrainConfig& tcfg,
              const std::function<void(const EpochLog&)>& per_epoch) {
  tcfg.validate();
  if (dataset.validation.empty())
    throw DataError("fit requires a validation split");

  Rng rng(derive_seed(tcfg.seed, 2));
  OptimizerState opt = OptimizerState::init(state, tcfg.optimizer);
  EarlyStopper stopper(tcfg.early_stop_patience);

  FitResult result;
  result.best_state = state;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    EpochStats stats = train_epoch(state, dataset, op, mcfg, tcfg, opt, rng);

    EpochLog log;
    log.epoch = epoch;
    log.loss = stats.mean_loss;
    log.seconds = tcfg.log_timing ? stats.seconds : 0.0;

    if (epoch % tcfg.eval_every == 0) {
      ForwardResult fwd = forward(state, op, mcfg);
      EvalReport report = evaluate(fwd.e_star, dataset, 20, Split::kValidation,
                                   tcfg.eval_threads);
      log.evaluated = true;
      log.recall20 = report.recall_at_k;
      log.ndcg20 = report.ndcg_at_k;

      if (stopper.observe(report.recall_at_k)) {
        result.best_state = state;
        result.best_recall20 = report.recall_at_k;
        result.best_epoch = epoch;
      }
    }

    result.log.push_back(log);
    if (per_epoch) per_epoch(log);
    result.epochs_run = epoch;
    if (log.evaluated && stopper.should_stop()) break;
  }

  // Never evaluated (epochs < eval_every): keep the final state.
  if (result.best_recall20 < 0.0) {
    result.best_state = state;
    result.best_epoch = result.epochs_run;
  }
  return result;
}

}  // namespace cdecf
