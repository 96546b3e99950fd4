// SPDX-License-Identifier: Apache-2.0
//
// ponvkit CLI: stats | split | train | evaluate | explain | report | scores |
// synth | run, all driven by one config file. Exit codes: 0 success, 2 config
// error, 3 data error, 4 stage failure.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ponv/ponv.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  long seed_override = -1;
  long workers_override = -1;
  std::string out_override;
};

ponv::RunConfig load_config(const CommonOpts& opts) {
  ponv::RunConfig cfg = ponv::load_run_config(opts.config_path);
  if (opts.seed_override >= 0) cfg.seed = static_cast<uint64_t>(opts.seed_override);
  if (opts.workers_override >= 1) cfg.workers = static_cast<unsigned>(opts.workers_override);
  if (!opts.out_override.empty()) cfg.out_dir = opts.out_override;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "configuration file")->required();
  cmd->add_option("--seed", opts.seed_override, "override [run] seed");
  cmd->add_option("--workers", opts.workers_override, "override [run] workers");
  cmd->add_option("--out", opts.out_override, "override [run] out directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PONV model development toolkit"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string synth_csv = "synthetic.csv";
  std::string synth_schema = "synthetic_schema.txt";

  CLI::App* stats = app.add_subcommand("stats", "descriptive statistics and correlation matrices");
  CLI::App* split = app.add_subcommand("split", "distribution-preserving k-fold split");
  CLI::App* train = app.add_subcommand("train", "pipeline search and final model fit");
  CLI::App* evaluate = app.add_subcommand("evaluate", "k-fold comparison against the clinical scores");
  CLI::App* explain = app.add_subcommand("explain", "ablation importance and SHAP attribution");
  CLI::App* report = app.add_subcommand("report", "consolidate stage artifacts into one report");
  CLI::App* scores = app.add_subcommand("scores", "per-record clinical risk scores as CSV");
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset and schema");
  CLI::App* run = app.add_subcommand("run", "full workflow: stats, split, train, evaluate, explain, report");
  for (CLI::App* cmd : {stats, split, train, evaluate, explain, report, scores, synth, run})
    add_common(cmd, opts);
  synth->add_option("--csv", synth_csv, "output dataset file name (inside out dir)");
  synth->add_option("--schema", synth_schema, "output schema file name (inside out dir)");

  CLI11_PARSE(app, argc, argv);

  try {
    ponv::RunConfig cfg = load_config(opts);
    ponv::Runner runner(cfg);
    if (stats->parsed()) {
      runner.run_stats();
    } else if (split->parsed()) {
      runner.run_split();
    } else if (train->parsed()) {
      for (const auto& target : cfg.targets()) runner.run_train(target);
    } else if (evaluate->parsed()) {
      for (const auto& target : cfg.targets()) runner.run_evaluate(target);
    } else if (explain->parsed()) {
      for (const auto& target : cfg.targets()) runner.run_explain(target);
    } else if (report->parsed()) {
      runner.run_report();
    } else if (scores->parsed()) {
      runner.run_scores();
    } else if (synth->parsed()) {
      const ponv::Dataset d = ponv::synth_generate(cfg.synth, cfg.seed);
      std::ostringstream body;
      d.write_csv(body, runner.provenance());
      runner.write_file(synth_csv, body.str());
      runner.write_file(synth_schema, d.schema().serialize());
    } else if (run->parsed()) {
      runner.run_all();
    }
  } catch (const ponv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ponv::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
