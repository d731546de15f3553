#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cdecf/matrix.hpp"
#include "cdecf/rng.hpp"

namespace cdecf {

enum class SolverMethod { kEuler, kRK4 };

const char* to_string(SolverMethod m);
SolverMethod solver_method_from_string(const std::string& s);

/// Fixed-step explicit solver configuration over [t0, t1] with N steps.
struct SolverConfig {
  SolverMethod method = SolverMethod::kEuler;
  double t0 = 0.0;
  double t1 = 6.5;
  int steps = 7;

  double step_size() const { return (t1 - t0) / steps; }
  void validate() const;
};

/// MLP d -> H -> 1 (tanh hidden layer). sigmoid(mlp(e)) gives the per-node
/// propagation weight in (0, 1).
struct WeightController {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<double> w1;  // hidden_dim x input_dim, row-major
  std::vector<double> b1;  // hidden_dim
  std::vector<double> w2;  // hidden_dim
  double b2 = 0.0;

  static WeightController init(std::size_t input_dim, std::size_t hidden_dim,
                               double init_std, Rng& rng);

  std::size_t param_count() const {
    return input_dim * hidden_dim + hidden_dim + hidden_dim + 1;
  }

  /// Pre-activation z = w2 . tanh(w1 e + b1) + b2 for one node embedding.
  /// hidden must have room for hidden_dim values (tanh outputs are written
  /// there; callers doing backprop reuse them).
  double preactivation(const double* e, double* hidden) const;

  /// Row-wise weights sigmoid(mlp(e_j)) for every row of E.
  /// Throws NumericError (with the node index) on non-finite input.
  void weights(const Matrix& e, std::vector<double>& out) const;

  /// Backprop one node: given d(loss)/d(z) for the pre-activation, accumulate
  /// parameter gradients into grads (same shapes as *this) and the embedding
  /// gradient into grad_e (length input_dim). hidden are the tanh outputs
  /// from preactivation(e, hidden).
  void backprop_node(const double* e, const double* hidden, double grad_z,
                     WeightController& grads, double* grad_e) const;
};

double sigmoid(double z);

/// All stage inputs retained by solve(), consumed by backward().
/// Euler: one stage per step (the step's start state). RK4: four.
struct SolveTrace {
  SolverMethod method = SolverMethod::kEuler;
  double step_size = 0.0;

  struct Step {
    double t = 0.0;
    std::vector<Matrix> stages;
  };
  std::vector<Step> steps;
  Matrix final_state;
};

/// dE/dt evaluated in place: f(E, t) -> out.
using DerivFn = std::function<void(const Matrix& e, double t, Matrix& out)>;

/// Vector-Jacobian product of the derivative at a recorded stage:
/// accumulates cotangent^T dF/dE into grad_e (+=). Parameter cotangents are
/// the closure's responsibility (it owns the parameter gradient buffers).
using DerivVjpFn = std::function<void(const Matrix& stage_e, double t,
                                      const Matrix& cotangent, Matrix& grad_e)>;

/// Integrate E' = f(E, t) from e0 over cfg's grid. Every step's state is
/// checked for finiteness; divergence throws NumericError with the step
/// index. When trace is non-null all stage inputs are recorded.
Matrix solve(const Matrix& e0, const SolverConfig& cfg, const DerivFn& deriv,
             SolveTrace* trace);

/// Reverse-mode sweep over the unrolled solver (discretize-then-optimize).
/// Returns d(loss)/d(e0) given d(loss)/d(e_final); parameter gradients
/// accumulate inside the vjp closure.
Matrix backward(const SolveTrace& trace, const Matrix& grad_final,
                const DerivVjpFn& vjp);

}  // namespace cdecf
