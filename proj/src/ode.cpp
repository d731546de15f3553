#include "cdecf/ode.hpp"

#include <cmath>

#include "cdecf/errors.hpp"
#include "cdecf/kernels.hpp"

namespace cdecf {

const char* to_string(SolverMethod m) {
  return m == SolverMethod::kEuler ? "euler" : "rk4";
}

SolverMethod solver_method_from_string(const std::string& s) {
  if (s == "euler") return SolverMethod::kEuler;
  if (s == "rk4") return SolverMethod::kRK4;
  throw ConfigError("unknown solver method: " + s + " (expected euler|rk4)");
}

void SolverConfig::validate() const {
  if (!(t1 > t0)) throw ConfigError("solver requires t1 > t0");
  if (steps < 1) throw ConfigError("solver requires steps >= 1");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

WeightController WeightController::init(std::size_t input_dim,
                                        std::size_t hidden_dim,
                                        double init_std, Rng& rng) {
  WeightController c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  c.w1.resize(hidden_dim * input_dim);
  c.b1.assign(hidden_dim, 0.0);
  c.w2.resize(hidden_dim);
  for (auto& w : c.w1) w = rng.normal(0.0, init_std);
  for (auto& w : c.w2) w = rng.normal(0.0, init_std);
  c.b2 = 0.0;
  return c;
}

double WeightController::preactivation(const double* e, double* hidden) const {
  for (std::size_t h = 0; h < hidden_dim; ++h) {
    const double pre = kernels::dot(&w1[h * input_dim], e, input_dim) + b1[h];
    hidden[h] = std::tanh(pre);
  }
  return kernels::dot(w2.data(), hidden, hidden_dim) + b2;
}

void WeightController::weights(const Matrix& e, std::vector<double>& out) const {
  if (e.cols != input_dim)
    throw NumericError("controller expects embedding dim " +
                       std::to_string(input_dim) + ", got " +
                       std::to_string(e.cols));
  out.resize(e.rows);
  std::vector<double> hidden(hidden_dim);
  for (std::size_t j = 0; j < e.rows; ++j) {
    const double* row = e.row(j);
    for (std::size_t c = 0; c < e.cols; ++c) {
      if (!std::isfinite(row[c]))
        throw NumericError("non-finite embedding at node " + std::to_string(j));
    }
    out[j] = sigmoid(preactivation(row, hidden.data()));
  }
}

void WeightController::backprop_node(const double* e, const double* hidden,
                                     double grad_z, WeightController& grads,
                                     double* grad_e) const {
  // z = w2 . h + b2
  kernels::axpy(grad_z, hidden, grads.w2.data(), hidden_dim);
  grads.b2 += grad_z;
  for (std::size_t h = 0; h < hidden_dim; ++h) {
    const double grad_h = grad_z * w2[h];
    const double grad_pre = grad_h * (1.0 - hidden[h] * hidden[h]);
    grads.b1[h] += grad_pre;
    kernels::axpy(grad_pre, e, &grads.w1[h * input_dim], input_dim);
    kernels::axpy(grad_pre, &w1[h * input_dim], grad_e, input_dim);
  }
}

namespace {

void check_finite(const Matrix& state, int step) {
  if (!all_finite(state))
    throw NumericError("ODE diverged: non-finite state after step " +
                       std::to_string(step));
}

}  // namespace

Matrix solve(const Matrix& e0, const SolverConfig& cfg, const DerivFn& deriv,
             SolveTrace* trace) {
  cfg.validate();
  const double h = cfg.step_size();
  const std::size_t n = e0.size();

  if (trace) {
    trace->method = cfg.method;
    trace->step_size = h;
    trace->steps.clear();
    trace->steps.reserve(cfg.steps);
  }

  Matrix state = e0;
  Matrix k1(e0.rows, e0.cols), k2(e0.rows, e0.cols), k3(e0.rows, e0.cols),
      k4(e0.rows, e0.cols);
  Matrix stage(e0.rows, e0.cols);

  for (int step = 0; step < cfg.steps; ++step) {
    const double t = cfg.t0 + h * step;
    if (cfg.method == SolverMethod::kEuler) {
      if (trace) trace->steps.push_back({t, {state}});
      deriv(state, t, k1);
      kernels::axpy(h, k1.data.data(), state.data.data(), n);
    } else {
      SolveTrace::Step rec;
      rec.t = t;

      deriv(state, t, k1);
      kernels::add_scaled(state.data.data(), h / 2.0, k1.data.data(),
                          stage.data.data(), n);
      if (trace) {
        rec.stages.reserve(4);
        rec.stages.push_back(state);
        rec.stages.push_back(stage);
      }
      deriv(stage, t + h / 2.0, k2);
      kernels::add_scaled(state.data.data(), h / 2.0, k2.data.data(),
                          stage.data.data(), n);
      if (trace) rec.stages.push_back(stage);
      deriv(stage, t + h / 2.0, k3);
      kernels::add_scaled(state.data.data(), h, k3.data.data(),
                          stage.data.data(), n);
      if (trace) rec.stages.push_back(stage);
      deriv(stage, t + h, k4);

      // E += h/6 (k1 + 2 k2 + 2 k3 + k4)
      kernels::axpy(h / 6.0, k1.data.data(), state.data.data(), n);
      kernels::axpy(h / 3.0, k2.data.data(), state.data.data(), n);
      kernels::axpy(h / 3.0, k3.data.data(), state.data.data(), n);
      kernels::axpy(h / 6.0, k4.data.data(), state.data.data(), n);

      if (trace) trace->steps.push_back(std::move(rec));
    }
    check_finite(state, step);
  }

  if (trace) trace->final_state = state;
  return state;
}

Matrix backward(const SolveTrace& trace, const Matrix& grad_final,
                const DerivVjpFn& vjp) {
  const double h = trace.step_size;
  const std::size_t n = grad_final.size();

  Matrix g = grad_final;
  Matrix cot(grad_final.rows, grad_final.cols);
  Matrix gs(grad_final.rows, grad_final.cols);

  for (auto it = trace.steps.rbegin(); it != trace.steps.rend(); ++it) {
    const auto& step = *it;
    if (trace.method == SolverMethod::kEuler) {
      if (step.stages.size() != 1)
        throw NumericError("trace/solver mismatch: Euler step needs 1 stage");
      // E' = E + h f(E):  g_prev = g + h * J^T g
      kernels::scale(h, g.data.data(), cot.data.data(), n);
      vjp(step.stages[0], step.t, cot, g);
    } else {
      if (step.stages.size() != 4)
        throw NumericError("trace/solver mismatch: RK4 step needs 4 stages");
      const Matrix& s1 = step.stages[0];
      const Matrix& s2 = step.stages[1];
      const Matrix& s3 = step.stages[2];
      const Matrix& s4 = step.stages[3];

      Matrix g_prev = g;  // direct E_k -> E_{k+1} path

      // k4 cotangent = h/6 g
      kernels::scale(h / 6.0, g.data.data(), cot.data.data(), n);
      gs.fill(0.0);
      vjp(s4, step.t + h, cot, gs);
      for (std::size_t i = 0; i < n; ++i) g_prev.data[i] += gs.data[i];

      // k3 cotangent = h/3 g + h * gS4
      kernels::scale(h / 3.0, g.data.data(), cot.data.data(), n);
      kernels::axpy(h, gs.data.data(), cot.data.data(), n);
      gs.fill(0.0);
      vjp(s3, step.t + h / 2.0, cot, gs);
      for (std::size_t i = 0; i < n; ++i) g_prev.data[i] += gs.data[i];

      // k2 cotangent = h/3 g + h/2 * gS3
      kernels::scale(h / 3.0, g.data.data(), cot.data.data(), n);
      kernels::axpy(h / 2.0, gs.data.data(), cot.data.data(), n);
      gs.fill(0.0);
      vjp(s2, step.t + h / 2.0, cot, gs);
      for (std::size_t i = 0; i < n; ++i) g_prev.data[i] += gs.data[i];

      // k1 cotangent = h/6 g + h/2 * gS2
      kernels::scale(h / 6.0, g.data.data(), cot.data.data(), n);
      kernels::axpy(h / 2.0, gs.data.data(), cot.data.data(), n);
      gs.fill(0.0);
      vjp(s1, step.t, cot, gs);
      for (std::size_t i = 0; i < n; ++i) g_prev.data[i] += gs.data[i];

      g = std::move(g_prev);
    }
  }
  return g;
}

}  // namespace cdecf
