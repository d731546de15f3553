#include "cdecf/model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cdecf/errors.hpp"
#include "cdecf/io_util.hpp"
#include "cdecf/kernels.hpp"

namespace cdecf {

namespace {

constexpr char kMagic[8] = {'C', 'D', 'E', 'C', 'F', '-', 'C', 'K'};
constexpr std::uint16_t kFormatVersion = 1;

double softplus(double x) {
  // ln(1 + e^x) without overflow for large |x|.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kNoWeight: return "no_weight";
    case Variant::kDiscreteWeight: return "discrete_weight";
    case Variant::kControlled: return "controlled";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "no_weight") return Variant::kNoWeight;
  if (s == "discrete_weight") return Variant::kDiscreteWeight;
  if (s == "controlled") return Variant::kControlled;
  throw ConfigError("unknown variant: " + s +
                    " (expected no_weight|discrete_weight|controlled)");
}

void ModelConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (l2_lambda < 0.0) throw ConfigError("l2_lambda must be >= 0");
  if (init_std <= 0.0) throw ConfigError("init_std must be > 0");
  if (propagation_order < 1) throw ConfigError("propagation_order must be >= 1");
  solver.validate();
}

ModelState ModelState::init(const ModelConfig& cfg, std::size_t num_users,
                            std::size_t num_items) {
  cfg.validate();
  ModelState s;
  s.num_users = num_users;
  s.num_items = num_items;
  Rng rng(derive_seed(cfg.seed, 1));
  s.e0.resize(num_users + num_items, cfg.embedding_dim);
  for (auto& v : s.e0.data) v = rng.normal(0.0, cfg.init_std);
  if (cfg.variant == Variant::kControlled) {
    s.controller = WeightController::init(cfg.embedding_dim,
                                          cfg.resolved_hidden_dim(),
                                          cfg.init_std, rng);
  } else if (cfg.variant == Variant::kDiscreteWeight) {
    s.discrete_weight.assign(num_users + num_items, 1.0);
  }
  return s;
}

ModelGrads ModelGrads::zeros_like(const ModelState& state) {
  ModelGrads g;
  g.e0.resize(state.e0.rows, state.e0.cols);
  if (state.controller) {
    WeightController c;
    c.input_dim = state.controller->input_dim;
    c.hidden_dim = state.controller->hidden_dim;
    c.w1.assign(state.controller->w1.size(), 0.0);
    c.b1.assign(state.controller->b1.size(), 0.0);
    c.w2.assign(state.controller->w2.size(), 0.0);
    c.b2 = 0.0;
    g.controller = std::move(c);
  }
  if (!state.discrete_weight.empty())
    g.discrete_weight.assign(state.discrete_weight.size(), 0.0);
  return g;
}

namespace {

void check_weight_sources(const ModelState& state, const ModelConfig& cfg) {
  const bool has_controller = state.controller.has_value();
  const bool has_fixed = !state.discrete_weight.empty();
  if (has_controller && has_fixed)
    throw ConfigError("both controller and fixed weight supplied");
  if (cfg.variant == Variant::kControlled && !has_controller)
    throw ConfigError("CONTROLLED variant requires a weight controller");
  if (cfg.variant == Variant::kDiscreteWeight && !has_fixed)
    throw ConfigError("DISCRETE_WEIGHT variant requires a fixed weight vector");
  if (cfg.variant == Variant::kNoWeight && (has_controller || has_fixed))
    throw ConfigError("NO_WEIGHT variant carries no weight parameters");
}

}  // namespace

ForwardResult forward(const ModelState& state, const PropagationOperator& op,
                      const ModelConfig& cfg, bool bypass_weight) {
  cfg.validate();
  check_weight_sources(state, cfg);

  Matrix scratch;
  std::vector<double> weights;
  const ModelState* s = &state;
  const ModelConfig* c = &cfg;

  DerivFn deriv = [s, c, &op, bypass_weight, scratch,
                   weights](const Matrix& e, double /*t*/,
                            Matrix& out) mutable {
    op.apply(e, out, scratch);
    if (bypass_weight || c->variant == Variant::kNoWeight) return;
    if (c->variant == Variant::kControlled) {
      s->controller->weights(e, weights);
    } else {
      weights.assign(s->discrete_weight.begin(), s->discrete_weight.end());
    }
    for (std::size_t j = 0; j < out.rows; ++j)
      kernels::scale(weights[j], out.row(j), out.row(j), out.cols);
  };

  ForwardResult result;
  result.e_star = solve(state.e0, cfg.solver, deriv, &result.trace);
  return result;
}

std::vector<double> predict_scores(const Matrix& e_star, std::size_t num_users,
                                   std::uint32_t user,
                                   const std::vector<std::uint32_t>& items) {
  if (user >= num_users) throw NumericError("user index out of range");
  const std::size_t num_items = e_star.rows - num_users;
  const double* u_row = e_star.row(user);
  std::vector<double> scores(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (items[k] >= num_items) throw NumericError("item index out of range");
    scores[k] = kernels::dot(u_row, e_star.row(num_users + items[k]),
                             e_star.cols);
  }
  return scores;
}

BprResult bpr_loss(const Matrix& e_star, std::size_t num_users,
                   const std::vector<TrainingTriple>& batch, const Matrix& e0,
                   double l2_lambda) {
  if (batch.empty()) throw NumericError("bpr_loss requires a non-empty batch");
  const std::size_t d = e_star.cols;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  BprResult r;
  r.grad_e_star.resize(e_star.rows, d);
  r.grad_e0.resize(e0.rows, d);

  double rank_loss = 0.0;
  double reg = 0.0;
  for (const auto& t : batch) {
    const std::size_t u = t.user;
    const std::size_t i = num_users + t.pos_item;
    const std::size_t j = num_users + t.neg_item;
    const double* eu = e_star.row(u);
    const double* ei = e_star.row(i);
    const double* ej = e_star.row(j);

    const double y_ui = kernels::dot(eu, ei, d);
    const double y_uj = kernels::dot(eu, ej, d);
    const double x = y_ui - y_uj;
    rank_loss += softplus(-x);

    // d/dx [softplus(-x)] = -sigmoid(-x)
    const double gx = -sigmoid(-x) * inv_b;
    kernels::axpy(gx, ei, r.grad_e_star.row(u), d);
    kernels::axpy(-gx, ej, r.grad_e_star.row(u), d);
    kernels::axpy(gx, eu, r.grad_e_star.row(i), d);
    kernels::axpy(-gx, eu, r.grad_e_star.row(j), d);

    if (l2_lambda > 0.0) {
      reg += kernels::sum_squares(e0.row(u), d);
      reg += kernels::sum_squares(e0.row(i), d);
      reg += kernels::sum_squares(e0.row(j), d);
      const double gr = 2.0 * l2_lambda * inv_b;
      kernels::axpy(gr, e0.row(u), r.grad_e0.row(u), d);
      kernels::axpy(gr, e0.row(i), r.grad_e0.row(i), d);
      kernels::axpy(gr, e0.row(j), r.grad_e0.row(j), d);
    }
  }
  r.loss = rank_loss * inv_b + l2_lambda * reg * inv_b;
  if (!std::isfinite(r.loss)) throw NumericError("non-finite BPR loss");
  return r;
}

ModelGrads backward_through_solver(const ModelState& state,
                                   const PropagationOperator& op,
                                   const ModelConfig& cfg,
                                   const SolveTrace& trace,
                                   const Matrix& grad_e_star,
                                   bool bypass_weight) {
  check_weight_sources(state, cfg);
  ModelGrads grads = ModelGrads::zeros_like(state);

  const bool weighted =
      !bypass_weight && cfg.variant != Variant::kNoWeight;

  Matrix prop_y, prop_scratch, weighted_cot, prop_back;
  std::vector<double> weights, hidden;

  DerivVjpFn vjp = [&](const Matrix& stage_e, double /*t*/,
                       const Matrix& cot, Matrix& grad_e) {
    const std::size_t d = stage_e.cols;
    if (!weighted) {
      // f = P(E): grad_e += P(cot) (P is symmetric).
      op.apply(cot, prop_back, prop_scratch);
      kernels::axpy(1.0, prop_back.data.data(), grad_e.data.data(),
                    grad_e.size());
      return;
    }

    // Recompute Y = P(E) and the node weights at this stage.
    op.apply(stage_e, prop_y, prop_scratch);
    if (cfg.variant == Variant::kControlled) {
      state.controller->weights(stage_e, weights);
    } else {
      weights.assign(state.discrete_weight.begin(),
                     state.discrete_weight.end());
    }

    // Propagation path: grad_e += P(diag(w) cot).
    weighted_cot.resize(cot.rows, cot.cols);
    for (std::size_t j = 0; j < cot.rows; ++j)
      kernels::scale(weights[j], cot.row(j), weighted_cot.row(j), d);
    op.apply(weighted_cot, prop_back, prop_scratch);
    kernels::axpy(1.0, prop_back.data.data(), grad_e.data.data(),
                  grad_e.size());

    // Weight path: dL/dw_j = <cot_j, Y_j>.
    if (cfg.variant == Variant::kDiscreteWeight) {
      for (std::size_t j = 0; j < cot.rows; ++j)
        grads.discrete_weight[j] +=
            kernels::dot(cot.row(j), prop_y.row(j), d);
    } else {
      const auto& ctrl = *state.controller;
      hidden.resize(ctrl.hidden_dim);
      for (std::size_t j = 0; j < cot.rows; ++j) {
        const double gw = kernels::dot(cot.row(j), prop_y.row(j), d);
        if (gw == 0.0) continue;
        const double z = ctrl.preactivation(stage_e.row(j), hidden.data());
        const double w = sigmoid(z);
        const double gz = gw * w * (1.0 - w);
        ctrl.backprop_node(stage_e.row(j), hidden.data(), gz,
                           *grads.controller, grad_e.row(j));
      }
    }
  };

  grads.e0 = backward(trace, grad_e_star, vjp);
  return grads;
}

std::vector<double> node_weights(const ModelState& state,
                                 const ModelConfig& cfg, const Matrix& e) {
  std::vector<double> w;
  switch (cfg.variant) {
    case Variant::kNoWeight:
      w.assign(e.rows, 1.0);
      break;
    case Variant::kDiscreteWeight:
      w = state.discrete_weight;
      break;
    case Variant::kControlled:
      state.controller->weights(e, w);
      break;
  }
  return w;
}

namespace {

nlohmann::json config_to_json(const ModelConfig& cfg, const ModelState& state) {
  return nlohmann::json{
      {"variant", to_string(cfg.variant)},
      {"embedding_dim", cfg.embedding_dim},
      {"hidden_dim", cfg.hidden_dim},
      {"propagation_order", cfg.propagation_order},
      {"solver",
       {{"method", to_string(cfg.solver.method)},
        {"t0", cfg.solver.t0},
        {"t1", cfg.solver.t1},
        {"steps", cfg.solver.steps}}},
      {"l2_lambda", cfg.l2_lambda},
      {"init_std", cfg.init_std},
      {"seed", cfg.seed},
      {"num_users", state.num_users},
      {"num_items", state.num_items},
  };
}

void write_tensor(std::ostream& out, const std::string& name,
                  const std::vector<std::uint64_t>& shape,
                  const double* data) {
  io::write_string(out, name);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  std::uint64_t count = 1;
  for (auto s : shape) {
    io::write_pod<std::uint64_t>(out, s);
    count *= s;
  }
  for (std::uint64_t i = 0; i < count; ++i)
    io::write_pod<float>(out, static_cast<float>(data[i]));
}

struct TensorIn {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

TensorIn read_tensor(std::istream& in, std::string& name,
                     std::uint64_t max_count) {
  name = io::read_string(in, "tensor name");
  const auto ndim = io::read_pod<std::uint32_t>(in, "tensor rank");
  if (ndim > 4) throw DataError("corrupt checkpoint: tensor rank " +
                                std::to_string(ndim));
  TensorIn t;
  std::uint64_t count = 1;
  for (std::uint32_t k = 0; k < ndim; ++k) {
    t.shape.push_back(io::read_pod<std::uint64_t>(in, "tensor shape"));
    if (t.shape.back() == 0 || t.shape.back() > max_count)
      throw DataError("corrupt checkpoint: implausible tensor shape");
    count *= t.shape.back();
  }
  if (count > max_count)
    throw DataError("corrupt checkpoint: tensor larger than file");
  t.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i)
    t.data[i] = io::read_pod<float>(in, "tensor data");
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);

  out.write(kMagic, sizeof(kMagic));
  io::write_pod<std::uint16_t>(out, kFormatVersion);
  io::write_string(out, config_to_json(cfg, state).dump());

  std::uint32_t tensor_count = 1;
  if (state.controller) tensor_count += 4;
  if (!state.discrete_weight.empty()) tensor_count += 1;
  io::write_pod<std::uint32_t>(out, tensor_count);

  write_tensor(out, "e0", {state.e0.rows, state.e0.cols}, state.e0.data.data());
  if (state.controller) {
    const auto& c = *state.controller;
    write_tensor(out, "controller.w1", {c.hidden_dim, c.input_dim},
                 c.w1.data());
    write_tensor(out, "controller.b1", {c.hidden_dim}, c.b1.data());
    write_tensor(out, "controller.w2", {c.hidden_dim}, c.w2.data());
    write_tensor(out, "controller.b2", {1}, &c.b2);
  }
  if (!state.discrete_weight.empty()) {
    write_tensor(out, "discrete_weight", {state.discrete_weight.size()},
                 state.discrete_weight.data());
  }
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  const std::uint64_t file_size = std::filesystem::file_size(path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("incompatible checkpoint file (bad magic): " + path);
  const auto version = io::read_pod<std::uint16_t>(in, "version");
  if (version != kFormatVersion)
    throw DataError("incompatible checkpoint version: " +
                    std::to_string(version));

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_string(in, "config block"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint config: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.config.variant = variant_from_string(j.at("variant").get<std::string>());
    ck.config.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    ck.config.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    ck.config.propagation_order = j.at("propagation_order").get<int>();
    ck.config.solver.method =
        solver_method_from_string(j.at("solver").at("method").get<std::string>());
    ck.config.solver.t0 = j.at("solver").at("t0").get<double>();
    ck.config.solver.t1 = j.at("solver").at("t1").get<double>();
    ck.config.solver.steps = j.at("solver").at("steps").get<int>();
    ck.config.l2_lambda = j.at("l2_lambda").get<double>();
    ck.config.init_std = j.at("init_std").get<double>();
    ck.config.seed = j.at("seed").get<std::uint64_t>();
    ck.state.num_users = j.at("num_users").get<std::size_t>();
    ck.state.num_items = j.at("num_items").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint config: ") + e.what());
  }

  const auto tensor_count = io::read_pod<std::uint32_t>(in, "tensor count");
  if (tensor_count > 16)
    throw DataError("corrupt checkpoint: tensor count " +
                    std::to_string(tensor_count));
  for (std::uint32_t k = 0; k < tensor_count; ++k) {
    std::string name;
    TensorIn t = read_tensor(in, name, file_size / sizeof(float));
    if (name == "e0") {
      if (t.shape.size() != 2)
        throw DataError("corrupt checkpoint: e0 must be 2-D");
      ck.state.e0.rows = t.shape[0];
      ck.state.e0.cols = t.shape[1];
      ck.state.e0.data = std::move(t.data);
    } else if (name == "discrete_weight") {
      ck.state.discrete_weight = std::move(t.data);
    } else if (name.rfind("controller.", 0) == 0) {
      if (!ck.state.controller) {
        ck.state.controller = WeightController{};
        ck.state.controller->input_dim = ck.config.embedding_dim;
        ck.state.controller->hidden_dim = ck.config.resolved_hidden_dim();
      }
      auto& c = *ck.state.controller;
      if (name == "controller.w1") c.w1 = std::move(t.data);
      else if (name == "controller.b1") c.b1 = std::move(t.data);
      else if (name == "controller.w2") c.w2 = std::move(t.data);
      else if (name == "controller.b2") c.b2 = t.data.at(0);
      else throw DataError("unknown checkpoint tensor: " + name);
    } else {
      throw DataError("unknown checkpoint tensor: " + name);
    }
  }

  if (ck.state.e0.rows != ck.state.num_users + ck.state.num_items ||
      ck.state.e0.cols != ck.config.embedding_dim)
    throw DataError("corrupt checkpoint: e0 shape mismatch");
  return ck;
}

}  // namespace cdecf
