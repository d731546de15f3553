#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "cdecf/config.hpp"
#include "cdecf/dataset.hpp"

namespace cdecf::cli {

struct PrepareArgs {
  std::string input;
  std::string output;
  std::size_t k_core = 5;
  IngestOptions ingest;
};

/// ingest -> k-core -> splits -> save; prints counts and sparsity.
void cmd_prepare(const PrepareArgs& args, std::ostream& out);

struct TrainArgs {
  std::string config_path;
  ConfigOverrides overrides;
};

/// Full training run; writes checkpoint.bin, training_log.ndjson,
/// config_resolved.json and val_report.json into the output directory.
void cmd_train(const TrainArgs& args, std::ostream& out);

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::vector<int> k_list = {20};
  unsigned threads = 0;
  std::string out_dir;
};

/// Test-split evaluation at each K; writes report.json and report.txt.
void cmd_eval(const EvalArgs& args, std::ostream& out);

struct AblationArgs {
  std::string config_path;
  ConfigOverrides overrides;
};

/// Trains all three variants with a shared seed, evaluates each on TEST and
/// dumps per-variant weight trajectories (weights_<variant>.csv).
void cmd_ablation(const AblationArgs& args, std::ostream& out);

}  // namespace cdecf::cli
