#include "cdecf/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cdecf/errors.hpp"

namespace cdecf {

namespace {

using nlohmann::json;

/// Schema walker that accumulates every bad key instead of stopping at the
/// first, so one failed run reports the full repair list.
class Validator {
 public:
  explicit Validator(const std::string& origin) : origin_(origin) {}

  template <typename T>
  void get(const json& obj, const std::string& scope, const std::string& key,
           T& out) {
    if (!obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      errors_.push_back(scope + key + ": wrong type");
    }
    seen_.push_back(scope + key);
  }

  void check_unknown(const json& obj, const std::string& scope) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const std::string full = scope + it.key();
      if (it->is_object()) continue;  // nested scopes validated separately
      bool known = false;
      for (const auto& s : seen_)
        if (s == full) { known = true; break; }
      if (!known) errors_.push_back(full + ": unknown key");
    }
  }

  void add_error(const std::string& msg) { errors_.push_back(msg); }

  void throw_if_failed() const {
    if (errors_.empty()) return;
    std::ostringstream out;
    out << "invalid config " << origin_ << " (" << errors_.size()
        << " problem" << (errors_.size() > 1 ? "s" : "") << "):";
    for (const auto& e : errors_) out << "\n  - " << e;
    throw ConfigError(out.str());
  }

 private:
  std::string origin_;
  std::vector<std::string> seen_;
  std::vector<std::string> errors_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + origin + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  ExperimentConfig cfg;
  Validator v(origin);

  v.get(j, "", "dataset", cfg.dataset_path);
  v.get(j, "", "out_dir", cfg.out_dir);
  v.get(j, "", "seed", cfg.seed);
  v.check_unknown(j, "");

  if (j.contains("model")) {
    const json& m = j.at("model");
    std::string variant = to_string(cfg.model.variant);
    v.get(m, "model.", "variant", variant);
    try {
      cfg.model.variant = variant_from_string(variant);
    } catch (const ConfigError& e) {
      v.add_error(e.what());
    }
    v.get(m, "model.", "embedding_dim", cfg.model.embedding_dim);
    v.get(m, "model.", "hidden_dim", cfg.model.hidden_dim);
    v.get(m, "model.", "propagation_order", cfg.model.propagation_order);
    v.get(m, "model.", "l2_lambda", cfg.model.l2_lambda);
    v.get(m, "model.", "init_std", cfg.model.init_std);
    v.check_unknown(m, "model.");
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    std::string method = to_string(cfg.model.solver.method);
    v.get(s, "solver.", "method", method);
    try {
      cfg.model.solver.method = solver_method_from_string(method);
    } catch (const ConfigError& e) {
      v.add_error(e.what());
    }
    v.get(s, "solver.", "t0", cfg.model.solver.t0);
    v.get(s, "solver.", "t1", cfg.model.solver.t1);
    v.get(s, "solver.", "steps", cfg.model.solver.steps);
    v.check_unknown(s, "solver.");
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    std::string opt = to_string(cfg.train.optimizer);
    v.get(t, "train.", "optimizer", opt);
    try {
      cfg.train.optimizer = optimizer_from_string(opt);
    } catch (const ConfigError& e) {
      v.add_error(e.what());
    }
    v.get(t, "train.", "epochs", cfg.train.epochs);
    v.get(t, "train.", "batch_size", cfg.train.batch_size);
    v.get(t, "train.", "learning_rate", cfg.train.learning_rate);
    v.get(t, "train.", "beta1", cfg.train.beta1);
    v.get(t, "train.", "beta2", cfg.train.beta2);
    v.get(t, "train.", "eps", cfg.train.eps);
    v.get(t, "train.", "eval_every", cfg.train.eval_every);
    v.get(t, "train.", "early_stop_patience", cfg.train.early_stop_patience);
    v.get(t, "train.", "log_timing", cfg.train.log_timing);
    v.check_unknown(t, "train.");
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    v.get(e, "eval.", "k", cfg.eval_k);
    v.get(e, "eval.", "threads", cfg.threads);
    v.check_unknown(e, "eval.");
  }

  v.throw_if_failed();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str(), path);
}

void ExperimentConfig::finalize() {
  model.seed = seed;
  train.seed = seed;
  train.eval_threads = threads;
  model.validate();
  train.validate();
  if (eval_k.empty()) throw ConfigError("eval.k must list at least one cutoff");
  for (int k : eval_k)
    if (k < 1) throw ConfigError("eval.k entries must be >= 1");
}

std::string ExperimentConfig::to_json() const {
  json j{
      {"dataset", dataset_path},
      {"out_dir", out_dir},
      {"seed", seed},
      {"model",
       {{"variant", to_string(model.variant)},
        {"embedding_dim", model.embedding_dim},
        {"hidden_dim", model.resolved_hidden_dim()},
        {"propagation_order", model.propagation_order},
        {"l2_lambda", model.l2_lambda},
        {"init_std", model.init_std}}},
      {"solver",
       {{"method", to_string(model.solver.method)},
        {"t0", model.solver.t0},
        {"t1", model.solver.t1},
        {"steps", model.solver.steps}}},
      {"train",
       {{"optimizer", to_string(train.optimizer)},
        {"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"learning_rate", train.learning_rate},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"eps", train.eps},
        {"eval_every", train.eval_every},
        {"early_stop_patience", train.early_stop_patience},
        {"log_timing", train.log_timing}}},
      {"eval", {{"k", eval_k}, {"threads", threads}}},
  };
  return j.dump(2);
}

void ConfigOverrides::apply(ExperimentConfig& cfg) const {
  if (seed) cfg.seed = *seed;
  if (variant) cfg.model.variant = variant_from_string(*variant);
  if (solver) cfg.model.solver.method = solver_method_from_string(*solver);
  if (t1) cfg.model.solver.t1 = *t1;
  if (steps) cfg.model.solver.steps = *steps;
  if (out_dir) cfg.out_dir = *out_dir;
  if (dataset) cfg.dataset_path = *dataset;
  if (threads) cfg.threads = *threads;
  if (epochs) cfg.train.epochs = *epochs;
}

}  // namespace cdecf
