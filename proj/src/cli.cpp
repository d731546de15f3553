#include "cdecf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cdecf/errors.hpp"
#include "cdecf/evaluator.hpp"
#include "cdecf/graph.hpp"
#include "cdecf/model.hpp"
#include "cdecf/trainer.hpp"

namespace cdecf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void cmd_prepare(const PrepareArgs& args, std::ostream& out) {
  std::ifstream in(args.input);
  if (!in) throw ConfigError("cannot open input file: " + args.input);

  IngestStats stats;
  auto interactions = ingest(in, args.ingest, stats);
  out << "ingested " << stats.total_records << " records ("
      << interactions.size() << " unique pairs, " << stats.duplicate_pairs
      << " duplicates collapsed)\n";
  if (stats.malformed > 0)
    out << "warning: " << stats.malformed << " malformed lines skipped\n";

  interactions = kcore_filter_users(std::move(interactions), args.k_core);
  InteractionDataset ds = build_splits(interactions);
  ds.save(args.output);

  out << "users: " << ds.num_users << "  items: " << ds.num_items << "\n";
  out << std::left << std::setw(12) << "Training" << std::setw(12)
      << "Validation" << std::setw(12) << "Testing" << "Sparsity\n";
  std::ostringstream sparsity;
  sparsity << std::setprecision(5) << ds.sparsity() * 100.0 << "%";
  out << std::left << std::setw(12) << ds.train.size() << std::setw(12)
      << ds.validation.size() << std::setw(12) << ds.test.size()
      << sparsity.str() << "\n";
  out << "wrote " << args.output << "\n";
}

namespace {

struct RunContext {
  InteractionDataset dataset;
  NormalizedAdjacency adjacency;
  PropagationOperator prop;
};

RunContext load_run_context(const ExperimentConfig& cfg) {
  RunContext ctx;
  if (cfg.dataset_path.empty())
    throw ConfigError("no dataset path (config key \"dataset\" or --dataset)");
  ctx.dataset = InteractionDataset::load(cfg.dataset_path);
  ctx.adjacency = NormalizedAdjacency::build(ctx.dataset);
  ctx.prop = PropagationOperator(ctx.adjacency, cfg.model.propagation_order);
  return ctx;
}

ExperimentConfig load_experiment(const std::string& config_path,
                                 const ConfigOverrides& overrides) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  overrides.apply(cfg);
  cfg.finalize();
  return cfg;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

json report_json(const std::vector<EvalReport>& reports) {
  json metrics = json::array();
  for (const auto& r : reports) {
    metrics.push_back({{"k", r.k},
                       {"recall", r.recall_at_k},
                       {"ndcg", r.ndcg_at_k}});
  }
  return metrics;
}

std::string metrics_table(const std::string& row_label,
                          const std::vector<std::vector<EvalReport>>& rows,
                          const std::vector<std::string>& labels,
                          const std::vector<int>& k_list,
                          const std::vector<bool>& failed = {}) {
  std::ostringstream out;
  out << std::left << std::setw(18) << row_label;
  for (int k : k_list)
    out << std::right << std::setw(12) << ("Recall@" + std::to_string(k))
        << std::setw(12) << ("NDCG@" + std::to_string(k));
  out << "\n";
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out << std::left << std::setw(18) << labels[r];
    if (!failed.empty() && failed[r]) {
      out << std::right << std::setw(12) << "FAILED";
      out << "\n";
      continue;
    }
    for (const auto& rep : rows[r]) {
      out << std::right << std::setw(12) << std::fixed << std::setprecision(5)
          << rep.recall_at_k << std::setw(12) << rep.ndcg_at_k;
    }
    out << "\n";
  }
  return out.str();
}

/// Weight values per node sampled at every solver step start time.
std::string weight_trajectory_csv(const ModelState& state,
                                  const ModelConfig& cfg,
                                  const SolveTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "time,node_index,weight\n";
  for (const auto& step : trace.steps) {
    const Matrix& stage = step.stages.front();
    const auto weights = node_weights(state, cfg, stage);
    for (std::size_t j = 0; j < weights.size(); ++j)
      out << step.t << "," << j << "," << weights[j] << "\n";
  }
  return out.str();
}

struct VariantRun {
  ModelConfig model_cfg;
  FitResult fit_result;
  std::vector<EvalReport> test_reports;
};

VariantRun run_variant(const ExperimentConfig& cfg, const RunContext& ctx,
                       const fs::path& out_dir, const std::string& log_name,
                       std::ostream& out) {
  ModelState state = ModelState::init(cfg.model, ctx.dataset.num_users,
                                      ctx.dataset.num_items);

  std::ofstream log(out_dir / log_name);
  if (!log) throw DataError("cannot write " + (out_dir / log_name).string());
  log.precision(17);

  VariantRun run;
  run.model_cfg = cfg.model;
  run.fit_result = fit(state, ctx.dataset, ctx.prop, cfg.model, cfg.train,
                       [&log](const EpochLog& l) { log << l.to_ndjson() << "\n"; });

  out << "variant " << to_string(cfg.model.variant) << ": best val Recall@20 "
      << std::setprecision(5) << std::fixed << run.fit_result.best_recall20
      << " at epoch " << run.fit_result.best_epoch << " ("
      << run.fit_result.epochs_run << " epochs run)\n";
  out.unsetf(std::ios::fixed);

  ForwardResult fwd = forward(run.fit_result.best_state, ctx.prop, cfg.model);
  for (int k : cfg.eval_k)
    run.test_reports.push_back(
        evaluate(fwd.e_star, ctx.dataset, k, Split::kTest, cfg.threads));
  return run;
}

}  // namespace

void cmd_train(const TrainArgs& args, std::ostream& out) {
  ExperimentConfig cfg = load_experiment(args.config_path, args.overrides);
  RunContext ctx = load_run_context(cfg);

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config_resolved.json", cfg.to_json() + "\n");

  ModelState state = ModelState::init(cfg.model, ctx.dataset.num_users,
                                      ctx.dataset.num_items);

  std::ofstream log(out_dir / "training_log.ndjson");
  if (!log)
    throw DataError("cannot write " + (out_dir / "training_log.ndjson").string());
  log.precision(17);

  FitResult result =
      fit(state, ctx.dataset, ctx.prop, cfg.model, cfg.train,
          [&log, &out](const EpochLog& l) {
            log << l.to_ndjson() << "\n";
            if (l.evaluated) {
              out << "epoch " << l.epoch << ": loss " << l.loss
                  << ", val Recall@20 " << l.recall20 << ", NDCG@20 "
                  << l.ndcg20 << "\n";
            }
          });
  log.close();

  save_checkpoint((out_dir / "checkpoint.bin").string(), cfg.model,
                  result.best_state);

  // Validation report of the best state at every requested cutoff.
  ForwardResult fwd = forward(result.best_state, ctx.prop, cfg.model);
  std::vector<EvalReport> reports;
  for (int k : cfg.eval_k)
    reports.push_back(
        evaluate(fwd.e_star, ctx.dataset, k, Split::kValidation, cfg.threads));

  json val_report{{"split", "validation"},
                  {"variant", to_string(cfg.model.variant)},
                  {"best_epoch", result.best_epoch},
                  {"epochs_run", result.epochs_run},
                  {"metrics", report_json(reports)}};
  write_text_file(out_dir / "val_report.json", val_report.dump(2) + "\n");

  out << "trained " << to_string(cfg.model.variant) << " for "
      << result.epochs_run << " epochs; best val Recall@20 "
      << std::setprecision(5) << std::fixed << result.best_recall20
      << " at epoch " << result.best_epoch << "\n";
  out.unsetf(std::ios::fixed);
  out << "wrote " << (out_dir / "checkpoint.bin").string() << "\n";
}

void cmd_eval(const EvalArgs& args, std::ostream& out) {
  Checkpoint ck = load_checkpoint(args.checkpoint);
  InteractionDataset ds = InteractionDataset::load(args.dataset);
  if (ck.state.num_users != ds.num_users || ck.state.num_items != ds.num_items)
    throw DataError("checkpoint/dataset mismatch: checkpoint has " +
                    std::to_string(ck.state.num_users) + "x" +
                    std::to_string(ck.state.num_items) + " nodes, dataset " +
                    std::to_string(ds.num_users) + "x" +
                    std::to_string(ds.num_items));

  NormalizedAdjacency adj = NormalizedAdjacency::build(ds);
  PropagationOperator prop(adj, ck.config.propagation_order);
  ForwardResult fwd = forward(ck.state, prop, ck.config);

  std::vector<EvalReport> reports;
  for (int k : args.k_list)
    reports.push_back(evaluate(fwd.e_star, ds, k, Split::kTest, args.threads));

  const std::string table =
      metrics_table("variant", {reports}, {to_string(ck.config.variant)},
                    args.k_list);
  out << table;

  if (!args.out_dir.empty()) {
    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);
    json j{{"split", "test"},
           {"variant", to_string(ck.config.variant)},
           {"checkpoint", args.checkpoint},
           {"dataset", args.dataset},
           {"users_evaluated", reports.front().users_evaluated},
           {"metrics", report_json(reports)}};
    write_text_file(out_dir / "report.json", j.dump(2) + "\n");
    write_text_file(out_dir / "report.txt", table);
    out << "wrote " << (out_dir / "report.json").string() << "\n";
  }
}

void cmd_ablation(const AblationArgs& args, std::ostream& out) {
  ExperimentConfig cfg = load_experiment(args.config_path, args.overrides);
  RunContext ctx = load_run_context(cfg);

  const fs::path out_dir(cfg.out_dir);
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config_resolved.json", cfg.to_json() + "\n");

  const Variant variants[] = {Variant::kNoWeight, Variant::kDiscreteWeight,
                              Variant::kControlled};

  std::vector<std::string> labels;
  std::vector<std::vector<EvalReport>> rows;
  std::vector<bool> failed;
  json summary = json::array();

  for (Variant variant : variants) {
    ExperimentConfig vcfg = cfg;
    vcfg.model.variant = variant;
    const std::string name = to_string(variant);
    labels.push_back(name);
    try {
      VariantRun run = run_variant(vcfg, ctx, out_dir,
                                   "training_log_" + name + ".ndjson", out);
      save_checkpoint((out_dir / ("checkpoint_" + name + ".bin")).string(),
                      run.model_cfg, run.fit_result.best_state);

      ForwardResult fwd =
          forward(run.fit_result.best_state, ctx.prop, run.model_cfg);
      write_text_file(out_dir / ("weights_" + name + ".csv"),
                      weight_trajectory_csv(run.fit_result.best_state,
                                            run.model_cfg, fwd.trace));

      json vj{{"variant", name},
              {"best_epoch", run.fit_result.best_epoch},
              {"metrics", report_json(run.test_reports)}};
      summary.push_back(vj);
      rows.push_back(std::move(run.test_reports));
      failed.push_back(false);
    } catch (const std::exception& e) {
      out << "variant " << name << " FAILED: " << e.what() << "\n";
      summary.push_back({{"variant", name}, {"error", e.what()}});
      rows.emplace_back();
      failed.push_back(true);
    }
  }

  const std::string table =
      metrics_table("variant", rows, labels, cfg.eval_k, failed);
  out << table;
  write_text_file(out_dir / "ablation_table.txt", table);
  write_text_file(out_dir / "ablation.json", summary.dump(2) + "\n");
  out << "wrote " << (out_dir / "ablation_table.txt").string() << "\n";
}

}  // namespace cdecf::cli
