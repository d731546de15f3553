#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cdecf/cli.hpp"
#include "cdecf/errors.hpp"
#include "cdecf/kernels.hpp"

namespace {

// Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

void add_override_flags(CLI::App* cmd, cdecf::ConfigOverrides& ov) {
  cmd->add_option("--seed", ov.seed, "Master seed (overrides config)");
  cmd->add_option("--variant", ov.variant,
                  "Model variant: no_weight|discrete_weight|controlled");
  cmd->add_option("--solver", ov.solver, "ODE solver: euler|rk4");
  cmd->add_option("--t1", ov.t1, "Terminal integration time");
  cmd->add_option("--steps", ov.steps, "Solver step count");
  cmd->add_option("--epochs", ov.epochs, "Max training epochs");
  cmd->add_option("--out", ov.out_dir, "Output directory");
  cmd->add_option("--dataset", ov.dataset, "Prepared dataset path");
  cmd->add_option("--threads", ov.threads,
                  "Evaluation threads (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cdecf - graph neural controlled differential equations for "
      "collaborative filtering"};
  app.require_subcommand(1);

  std::string kernels = "auto";
  app.add_option("--kernels", kernels,
                 "Kernel backend: auto|scalar|avx2 (default auto)");

  // prepare
  cdecf::cli::PrepareArgs prep;
  std::string delimiter = ",";
  auto* prepare = app.add_subcommand(
      "prepare", "Ingest raw interactions and build leave-one-out splits");
  prepare->add_option("--input", prep.input, "Raw interaction file")
      ->required();
  prepare->add_option("--out", prep.output, "Output dataset path")->required();
  prepare->add_option("--k-core", prep.k_core, "Minimum distinct items per user")
      ->default_val(5);
  prepare->add_option("--delimiter", delimiter, "Field delimiter (one char)");
  prepare->add_flag("--skip-header", prep.ingest.skip_header,
                    "Skip the first line");
  prepare->add_option("--user-col", prep.ingest.user_field,
                      "0-based user column");
  prepare->add_option("--item-col", prep.ingest.item_field,
                      "0-based item column");
  prepare->add_option("--time-col", prep.ingest.timestamp_field,
                      "0-based timestamp column (Amazon ratings CSVs: 3)");
  std::uint64_t prep_seed = 0;
  prepare->add_option("--seed", prep_seed, "Accepted for uniformity (unused)");

  // train
  cdecf::cli::TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one model variant");
  train_cmd->add_option("--config", train.config_path, "Experiment config JSON")
      ->required();
  add_override_flags(train_cmd, train.overrides);

  // eval
  cdecf::cli::EvalArgs eval;
  auto* eval_cmd =
      app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")
      ->required();
  eval_cmd->add_option("--dataset", eval.dataset, "Prepared dataset path")
      ->required();
  eval_cmd->add_option("--k", eval.k_list, "Cutoff(s) K")->default_val(20);
  eval_cmd->add_option("--threads", eval.threads,
                       "Evaluation threads (0 = all cores)");
  eval_cmd->add_option("--out", eval.out_dir, "Report output directory");
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--seed", eval_seed, "Accepted for uniformity (unused)");

  // ablation
  cdecf::cli::AblationArgs ablation;
  auto* ablation_cmd = app.add_subcommand(
      "ablation", "Train and compare all three variants with a shared seed");
  ablation_cmd
      ->add_option("--config", ablation.config_path, "Experiment config JSON")
      ->required();
  add_override_flags(ablation_cmd, ablation.overrides);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    cdecf::kernels::set_backend(kernels);
    if (delimiter.size() != 1)
      throw cdecf::ConfigError("--delimiter must be a single character");
    prep.ingest.delimiter = delimiter[0];

    if (prepare->parsed()) cdecf::cli::cmd_prepare(prep, std::cout);
    if (train_cmd->parsed()) cdecf::cli::cmd_train(train, std::cout);
    if (eval_cmd->parsed()) cdecf::cli::cmd_eval(eval, std::cout);
    if (ablation_cmd->parsed()) cdecf::cli::cmd_ablation(ablation, std::cout);
  } catch (const cdecf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
