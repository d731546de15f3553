#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cdecf/model.hpp"
#include "cdecf/trainer.hpp"

namespace cdecf {

/// Declarative experiment description: JSON config file plus CLI overrides.
struct ExperimentConfig {
  std::string dataset_path;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  ModelConfig model;
  TrainConfig train;
  std::vector<int> eval_k = {20};
  unsigned threads = 0;  // 0 = hardware concurrency

  /// Parse a JSON config file. Collects every unknown or ill-typed key and
  /// reports them all in one ConfigError.
  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::string& origin);

  /// Propagate the master seed into the nested configs and fill derived
  /// defaults. Call after applying overrides.
  void finalize();

  /// Canonical JSON of the fully resolved config.
  std::string to_json() const;
};

/// Flag overrides shared by train/ablation commands; unset fields leave the
/// config file's values in place.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::string> solver;
  std::optional<double> t1;
  std::optional<int> steps;
  std::optional<std::string> out_dir;
  std::optional<std::string> dataset;
  std::optional<unsigned> threads;
  std::optional<int> epochs;

  void apply(ExperimentConfig& cfg) const;
};

}  // namespace cdecf
