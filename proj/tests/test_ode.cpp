#include <doctest.h>

#include <cmath>
#include <limits>

#include "cdecf/errors.hpp"
#include "cdecf/graph.hpp"
#include "cdecf/kernels.hpp"
#include "cdecf/model.hpp"
#include "cdecf/ode.hpp"

#include "oracles.hpp"

using namespace cdecf;

namespace {

SolverConfig solver(SolverMethod m, double t1, int steps) {
  SolverConfig cfg;
  cfg.method = m;
  cfg.t1 = t1;
  cfg.steps = steps;
  return cfg;
}

// Scalar mlp reference: z = b2 + sum_h w2[h] * tanh(b1[h] + sum_c w1[h][c] e[c])
double mlp_reference(const WeightController& c, const double* e) {
  double z = c.b2;
  for (std::size_t h = 0; h < c.hidden_dim; ++h) {
    double pre = c.b1[h];
    for (std::size_t k = 0; k < c.input_dim; ++k)
      pre += c.w1[h * c.input_dim + k] * e[k];
    z += c.w2[h] * std::tanh(pre);
  }
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

TEST_CASE("controller with zero parameters outputs exactly 0.5") {
  WeightController c;
  c.input_dim = 4;
  c.hidden_dim = 2;
  c.w1.assign(8, 0.0);
  c.b1.assign(2, 0.0);
  c.w2.assign(2, 0.0);
  c.b2 = 0.0;

  auto e = oracle::random_matrix(5, 4, 3);
  std::vector<double> w;
  c.weights(e, w);
  for (double v : w) CHECK(v == 0.5);
}

TEST_CASE("controller weights are row-wise pure and in (0,1)") {
  Rng rng(11);
  auto c = WeightController::init(6, 3, 0.5, rng);
  CHECK(c.param_count() == 6 * 3 + 3 + 3 + 1);

  Matrix e(4, 6);
  Rng erng(5);
  for (auto& v : e.data) v = erng.normal(0.0, 2.0);
  // duplicate row 2 into row 3
  for (std::size_t k = 0; k < 6; ++k) e.at(3, k) = e.at(2, k);

  std::vector<double> w;
  c.weights(e, w);
  CHECK(w[2] == w[3]);
  for (double v : w) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("controller matches the scalar per-element oracle") {
  Rng rng(21);
  auto c = WeightController::init(5, 2, 0.3, rng);
  auto e = oracle::random_matrix(3, 5, 77);
  std::vector<double> w;
  c.weights(e, w);
  for (std::size_t j = 0; j < 3; ++j)
    CHECK(std::abs(w[j] - mlp_reference(c, e.row(j))) < 1e-12);
}

TEST_CASE("controller rejects non-finite input with the node index") {
  Rng rng(1);
  auto c = WeightController::init(3, 2, 0.1, rng);
  Matrix e(2, 3);
  e.at(1, 2) = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> w;
  CHECK_THROWS_WITH_AS(c.weights(e, w), "non-finite embedding at node 1",
                       NumericError);
}

TEST_CASE("Euler on dh/dt = -h reproduces the closed-form recurrence") {
  Matrix h0(1, 1);
  h0.at(0, 0) = 1.0;
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(1, 1);
    out.at(0, 0) = -e.at(0, 0);
  };
  Matrix hf = solve(h0, solver(SolverMethod::kEuler, 1.0, 100), deriv, nullptr);
  CHECK(std::abs(hf.at(0, 0) - std::pow(0.99, 100)) < 1e-12);
  // analytic limit for reference
  CHECK(hf.at(0, 0) == doctest::Approx(0.36603234127322953).epsilon(1e-12));
}

TEST_CASE("RK4 on dh/dt = -h follows the stability-function recurrence") {
  // For y' = -y the classical RK4 step multiplies by
  // R(z) = 1 + z + z^2/2 + z^3/6 + z^4/24 at z = -h. That product IS the
  // solver's exact discrete solution; e^{-1} is approached at O(h^4).
  Matrix h0(1, 1);
  h0.at(0, 0) = 1.0;
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(1, 1);
    out.at(0, 0) = -e.at(0, 0);
  };
  auto stability = [](double z) {
    return 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
  };

  Matrix h10 = solve(h0, solver(SolverMethod::kRK4, 1.0, 10), deriv, nullptr);
  CHECK(std::abs(h10.at(0, 0) - std::pow(stability(-0.1), 10)) < 1e-14);
  // N=10 global error is ~3.3e-7; by N=20 it is inside 1e-7.
  CHECK(std::abs(h10.at(0, 0) - std::exp(-1.0)) < 5e-7);
  Matrix h20 = solve(h0, solver(SolverMethod::kRK4, 1.0, 20), deriv, nullptr);
  CHECK(std::abs(h20.at(0, 0) - std::exp(-1.0)) < 1e-7);
}

TEST_CASE("zero derivative keeps the state bit-identical") {
  auto e0 = oracle::random_matrix(4, 3, 5);
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(e.rows, e.cols);
    out.fill(0.0);
  };
  for (auto method : {SolverMethod::kEuler, SolverMethod::kRK4}) {
    SolveTrace trace;
    Matrix ef = solve(e0, solver(method, 2.0, 5), deriv, &trace);
    CHECK(ef.data == e0.data);
    CHECK(trace.final_state.data == ef.data);
  }
}

TEST_CASE("measured convergence orders: Euler ~1, RK4 ~4") {
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(1, 1);
    out.at(0, 0) = -e.at(0, 0);
  };
  const double exact = std::exp(-1.0);

  for (auto [method, expected, tol] :
       {std::tuple{SolverMethod::kEuler, 1.0, 0.1},
        std::tuple{SolverMethod::kRK4, 4.0, 0.3}}) {
    std::vector<double> errors;
    for (int n : {10, 20, 40, 80}) {
      Matrix h0(1, 1);
      h0.at(0, 0) = 1.0;
      Matrix hf = solve(h0, solver(method, 1.0, n), deriv, nullptr);
      errors.push_back(std::abs(hf.at(0, 0) - exact));
    }
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
      const double order = std::log2(errors[k] / errors[k + 1]);
      CHECK(order == doctest::Approx(expected).epsilon(tol / expected));
    }
  }
}

TEST_CASE("trace shape: N stage records for Euler, 4 per step for RK4") {
  auto e0 = oracle::random_matrix(3, 2, 9);
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(e.rows, e.cols);
    for (std::size_t i = 0; i < e.data.size(); ++i) out.data[i] = 0.1 * e.data[i];
  };
  SolveTrace te;
  solve(e0, solver(SolverMethod::kEuler, 1.0, 6), deriv, &te);
  REQUIRE(te.steps.size() == 6);
  for (const auto& s : te.steps) CHECK(s.stages.size() == 1);

  SolveTrace tr;
  solve(e0, solver(SolverMethod::kRK4, 1.0, 6), deriv, &tr);
  REQUIRE(tr.steps.size() == 6);
  for (const auto& s : tr.steps) CHECK(s.stages.size() == 4);
}

TEST_CASE("divergence raises with the step index") {
  Matrix h0(1, 1);
  h0.at(0, 0) = 1.0;
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(1, 1);
    out.at(0, 0) = e.at(0, 0) * 1e308;
  };
  CHECK_THROWS_WITH_AS(
      solve(h0, solver(SolverMethod::kEuler, 1.0, 3), deriv, nullptr),
      "ODE diverged: non-finite state after step 1", NumericError);
}

TEST_CASE("solver config validation") {
  SolverConfig bad = solver(SolverMethod::kEuler, 0.0, 4);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = solver(SolverMethod::kEuler, 1.0, 0);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("backward of a zero derivative is the identity cotangent map") {
  auto e0 = oracle::random_matrix(3, 2, 13);
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(e.rows, e.cols);
    out.fill(0.0);
  };
  for (auto method : {SolverMethod::kEuler, SolverMethod::kRK4}) {
    SolveTrace trace;
    solve(e0, solver(method, 1.0, 4), deriv, &trace);
    auto gf = oracle::random_matrix(3, 2, 14);
    DerivVjpFn vjp = [](const Matrix&, double, const Matrix&, Matrix&) {};
    Matrix g0 = backward(trace, gf, vjp);
    CHECK(g0.data == gf.data);
  }
}

TEST_CASE("backward rejects a trace that does not match its solver") {
  auto e0 = oracle::random_matrix(2, 2, 3);
  DerivFn deriv = [](const Matrix& e, double, Matrix& out) {
    out.resize(e.rows, e.cols);
    for (std::size_t i = 0; i < e.data.size(); ++i) out.data[i] = -e.data[i];
  };
  SolveTrace trace;
  solve(e0, solver(SolverMethod::kEuler, 1.0, 3), deriv, &trace);
  trace.method = SolverMethod::kRK4;  // tampered
  DerivVjpFn vjp = [](const Matrix&, double, const Matrix&, Matrix&) {};
  CHECK_THROWS_AS(backward(trace, e0, vjp), NumericError);
}

TEST_CASE("backward of scalar linear ODE matches (1+ah)^N") {
  const double a = 0.37;
  const int n_steps = 9;
  Matrix h0(1, 1);
  h0.at(0, 0) = 2.0;
  DerivFn deriv = [a](const Matrix& e, double, Matrix& out) {
    out.resize(1, 1);
    out.at(0, 0) = a * e.at(0, 0);
  };
  SolveTrace trace;
  solve(h0, solver(SolverMethod::kEuler, 1.0, n_steps), deriv, &trace);

  DerivVjpFn vjp = [a](const Matrix&, double, const Matrix& cot, Matrix& g) {
    g.at(0, 0) += a * cot.at(0, 0);
  };
  Matrix gf(1, 1);
  gf.at(0, 0) = 1.0;
  Matrix g0 = backward(trace, gf, vjp);

  const double h = 1.0 / n_steps;
  const double expected = std::pow(1.0 + a * h, n_steps);
  CHECK(std::abs(g0.at(0, 0) - expected) < 1e-10);
}

TEST_CASE("controlled trajectories stay inside the unweighted growth envelope") {
  // Weights live in (0,1) and A^n - I is negative semidefinite, so damping
  // the flow can only slow the contraction: every controlled state norm must
  // stay within the envelope max(|E0|, max_k |E_nw(t_k)|).
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto ds = oracle::random_dataset(4, 6, 4, seed + 400);
    auto adj = NormalizedAdjacency::build(ds);
    PropagationOperator op(adj, 2);

    ModelConfig cfg;
    cfg.variant = Variant::kControlled;
    cfg.embedding_dim = 6;
    cfg.hidden_dim = 3;
    cfg.solver = solver(SolverMethod::kEuler, 6.5, 7);
    cfg.seed = seed;
    ModelState controlled = ModelState::init(cfg, 4, 6);

    ModelConfig ncfg = cfg;
    ncfg.variant = Variant::kNoWeight;
    ModelState none = ModelState::init(ncfg, 4, 6);
    none.e0 = controlled.e0;

    auto norm = [](const Matrix& m) {
      return std::sqrt(kernels::sum_squares(m.data.data(), m.size()));
    };

    ForwardResult fwd_nw = forward(none, op, ncfg);
    double envelope = norm(controlled.e0);
    for (const auto& step : fwd_nw.trace.steps)
      envelope = std::max(envelope, norm(step.stages.front()));
    envelope = std::max(envelope, norm(fwd_nw.e_star));

    ForwardResult fwd_c = forward(controlled, op, cfg);
    for (const auto& step : fwd_c.trace.steps)
      CHECK(norm(step.stages.front()) <= envelope * (1.0 + 1e-9));
    CHECK(norm(fwd_c.e_star) <= envelope * (1.0 + 1e-9));
  }
}

TEST_CASE("dot-product (adjoint) identity on the CDE derivative") {
  // <v, J u> by forward difference == <J^T v, u> by backward, both routes
  // through the full controlled derivative.
  auto ds = oracle::random_dataset(3, 4, 3, 31);
  auto adj = NormalizedAdjacency::build(ds);
  PropagationOperator op(adj, 2);

  ModelConfig cfg;
  cfg.variant = Variant::kControlled;
  cfg.embedding_dim = 5;
  cfg.hidden_dim = 3;
  cfg.seed = 8;
  cfg.solver = solver(SolverMethod::kEuler, 1.5, 3);
  ModelState state = ModelState::init(cfg, ds.num_users, ds.num_items);

  ForwardResult fwd = forward(state, op, cfg);

  auto u = oracle::random_matrix(state.e0.rows, 5, 51, 1.0);
  auto v = oracle::random_matrix(state.e0.rows, 5, 52, 1.0);

  // forward difference of <v, solve(e0 + eps u)>
  const double eps = 1e-6;
  ModelState pushed = state;
  for (std::size_t i = 0; i < pushed.e0.data.size(); ++i)
    pushed.e0.data[i] += eps * u.data[i];
  ForwardResult fwd_up = forward(pushed, op, cfg);
  for (std::size_t i = 0; i < pushed.e0.data.size(); ++i)
    pushed.e0.data[i] -= 2.0 * eps * u.data[i];
  ForwardResult fwd_dn = forward(pushed, op, cfg);

  double v_Ju = 0.0;
  for (std::size_t i = 0; i < v.data.size(); ++i)
    v_Ju += v.data[i] * (fwd_up.e_star.data[i] - fwd_dn.e_star.data[i]) /
            (2.0 * eps);

  ModelGrads grads = backward_through_solver(state, op, cfg, fwd.trace, v);
  double Jtv_u = 0.0;
  for (std::size_t i = 0; i < u.data.size(); ++i)
    Jtv_u += grads.e0.data[i] * u.data[i];

  CHECK(oracle::rel_err(v_Ju, Jtv_u) < 1e-6);
}
