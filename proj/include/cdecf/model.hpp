#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdecf/graph.hpp"
#include "cdecf/matrix.hpp"
#include "cdecf/ode.hpp"

namespace cdecf {

enum class Variant { kNoWeight, kDiscreteWeight, kControlled };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::kControlled;
  std::size_t embedding_dim = 64;
  std::size_t hidden_dim = 0;  // 0 -> embedding_dim / 2 (min 1)
  int propagation_order = 2;
  SolverConfig solver;
  double l2_lambda = 1e-4;
  double init_std = 0.1;
  std::uint64_t seed = 42;

  std::size_t resolved_hidden_dim() const {
    if (hidden_dim > 0) return hidden_dim;
    return embedding_dim / 2 > 0 ? embedding_dim / 2 : 1;
  }
  void validate() const;
};

/// Trainable state: initial embeddings plus the variant's weight parameters.
struct ModelState {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  Matrix e0;  // (U+I) x d
  std::optional<WeightController> controller;  // CONTROLLED
  std::vector<double> discrete_weight;         // DISCRETE_WEIGHT, per node

  static ModelState init(const ModelConfig& cfg, std::size_t num_users,
                         std::size_t num_items);

  std::size_t node_count() const { return num_users + num_items; }
};

/// Gradients mirroring ModelState's trainable tensors.
struct ModelGrads {
  Matrix e0;
  std::optional<WeightController> controller;  // same shapes, holds grads
  std::vector<double> discrete_weight;

  static ModelGrads zeros_like(const ModelState& state);
};

struct TrainingTriple {
  std::uint32_t user = 0;
  std::uint32_t pos_item = 0;
  std::uint32_t neg_item = 0;
};

struct ForwardResult {
  Matrix e_star;
  SolveTrace trace;
};

/// Integrate the variant's ODE from e0 to t1. bypass_weight forces the
/// propagation weight to exactly 1 (test hook; reduces every variant to the
/// unweighted equation).
ForwardResult forward(const ModelState& state, const PropagationOperator& op,
                      const ModelConfig& cfg, bool bypass_weight = false);

/// Inner-product scores of one user row against the given item rows.
std::vector<double> predict_scores(const Matrix& e_star, std::size_t num_users,
                                   std::uint32_t user,
                                   const std::vector<std::uint32_t>& items);

struct BprResult {
  double loss = 0.0;
  Matrix grad_e_star;  // cotangent for the solver backward pass
  Matrix grad_e0;      // direct L2 contribution on the initial embeddings
};

/// Pairwise BPR loss over a batch, with L2 on the batch's initial
/// embeddings: loss = -(1/B) sum ln sigmoid(y_ui - y_uj)
///                    + lambda/B * sum (|e0_u|^2 + |e0_i|^2 + |e0_j|^2).
/// The log-sigmoid is evaluated as -softplus(-x) so nothing underflows.
BprResult bpr_loss(const Matrix& e_star, std::size_t num_users,
                   const std::vector<TrainingTriple>& batch, const Matrix& e0,
                   double l2_lambda);

/// Reverse sweep through the recorded solve: maps d(loss)/d(e_star) to
/// gradients of e0 and of the variant's weight parameters.
ModelGrads backward_through_solver(const ModelState& state,
                                   const PropagationOperator& op,
                                   const ModelConfig& cfg,
                                   const SolveTrace& trace,
                                   const Matrix& grad_e_star,
                                   bool bypass_weight = false);

/// Node weights at a given state for trajectory inspection: 1 for NO_WEIGHT,
/// the static vector for DISCRETE_WEIGHT, sigmoid(mlp(e)) for CONTROLLED.
std::vector<double> node_weights(const ModelState& state,
                                 const ModelConfig& cfg, const Matrix& e);

/// Checkpoint I/O. Format: magic "CDECF-CK", version u16, canonical JSON
/// config block, then named f32 tensors.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelState& state);
struct Checkpoint {
  ModelConfig config;
  ModelState state;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cdecf
