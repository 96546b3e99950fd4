// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ponv/config.hpp"
#include "ponv/evaluation.hpp"
#include "ponv/explain.hpp"
#include "ponv/stats.hpp"
#include "ponv/svg.hpp"

namespace ponv {

using json = nlohmann::json;

// Stage orchestration behind the CLI subcommands. Every artifact embeds the
// config hash, the seed and the artifact version; re-running a stage with
// unchanged inputs must not change a single output byte.
class Runner {
 public:
  explicit Runner(RunConfig cfg) : cfg_(std::move(cfg)) { out_ = cfg_.out_dir; }

  const RunConfig& config() const { return cfg_; }

  std::string provenance() const {
    return std::string(kArtifactName) + " v" + std::to_string(kArtifactVersion) +
           " config=" + cfg_.config_hash + " seed=" + std::to_string(cfg_.seed);
  }

  json provenance_json() const {
    json p;
    p["artifact"] = kArtifactName;
    p["version"] = kArtifactVersion;
    p["config_hash"] = cfg_.config_hash;
    p["seed"] = cfg_.seed;
    return p;
  }

  // --------------------------------------------------------------- dataset
  const Dataset& dataset() {
    if (!data_) {
      if (cfg_.use_synth) {
        data_ = synth_generate(cfg_.synth, cfg_.seed);
      } else {
        const FeatureSchema schema = FeatureSchema::parse_file(cfg_.schema_path);
        LoadResult lr = load_csv(cfg_.dataset_path, schema);
        if (!lr.rejected.empty()) {
          std::ostringstream body;
          body << "# " << provenance() << "\nrow,column,reason\n";
          for (const auto& rej : lr.rejected)
            body << csv::join_row({std::to_string(rej.row), rej.column, rej.reason}) << "\n";
          write_file("rejected_rows.csv", body.str());
        }
        if (lr.data.n_rows() == 0) throw DataError("dataset: no rows survived validation");
        data_ = std::move(lr.data);
      }
    }
    return *data_;
  }

  // ----------------------------------------------------------------- stats
  void run_stats() {
    const Dataset& d = dataset();
    const StatsTable table = descriptive_stats(d);
    std::ostringstream s;
    table.write_csv(s, provenance());
    write_file("stats.csv", s.str());
    for (auto method : {CorrelationMethod::pearson, CorrelationMethod::spearman}) {
      const CorrelationMatrix m = correlation(d, method);
      std::ostringstream c;
      m.write_csv(c, provenance());
      write_file(method == CorrelationMethod::pearson ? "correlation_pearson.csv"
                                                      : "correlation_spearman.csv",
                 c.str());
    }
  }

  // ----------------------------------------------------------------- split
  Partition run_split() {
    const Dataset& d = dataset();
    Partition part;
    json summary;
    summary["provenance"] = provenance_json();
    summary["method"] = cfg_.split_method;
    summary["k"] = cfg_.k;
    if (cfg_.split_method == "dbc") {
      BeeColonyParams params = cfg_.bee;
      params.seed = derive_seed(cfg_.seed, 0x5b17);
      DbcResult res = dbc_optimize(d, cfg_.k, params);
      part = std::move(res.partition);
      summary["objective"] = res.objective;
      summary["initial_objective"] = res.initial_objective;
      summary["iterations"] = res.iterations;
      summary["timed_out"] = res.timed_out;
      // Monte-Carlo baseline: mean objective of uniform random partitions
      double baseline = 0.0;
      const int samples = 20;
      for (int s = 0; s < samples; ++s) {
        const Partition rp = random_partition(d, cfg_.k, derive_seed(cfg_.seed, 0x7000 + static_cast<uint64_t>(s)));
        baseline += cohort_distance(rp, d);
      }
      summary["random_baseline_objective"] = baseline / samples;
    } else {
      part = random_partition(d, cfg_.k, derive_seed(cfg_.seed, 0x5b17));
      summary["objective"] = cohort_distance(part, d);
    }
    std::ostringstream assign;
    assign << "# " << provenance() << "\nrecord_id,fold\n";
    for (size_t r = 0; r < part.assignment.size(); ++r)
      assign << r << "," << part.assignment[r] << "\n";
    write_file("split_assignment.csv", assign.str());
    write_file("split_summary.json", summary.dump(2) + "\n");
    return part;
  }

  // Reads the split artifact when present, otherwise computes (and writes) it.
  Partition partition() {
    const Dataset& d = dataset();
    const auto path = out_ / "split_assignment.csv";
    if (std::filesystem::exists(path)) {
      const auto rows = csv::read_file(path.string());
      if (rows.size() == d.n_rows() + 1) {
        std::vector<int> assignment(d.n_rows());
        int k = 0;
        bool ok = true;
        for (size_t i = 1; i < rows.size() && ok; ++i) {
          bool okc = false;
          const long fold = parse_long(rows[i][1], okc);
          ok = okc;
          if (ok) {
            assignment[i - 1] = static_cast<int>(fold);
            k = std::max(k, static_cast<int>(fold) + 1);
          }
        }
        if (ok && k == cfg_.k) return Partition::build(d, k, std::move(assignment));
      }
    }
    return run_split();
  }

  // ----------------------------------------------------------------- train
  struct TrainArtifacts {
    PipelineGenome genome;
    FittedPipeline pipeline;
    double fitness = 0.0;
  };

  TrainArtifacts run_train(const std::string& target) {
    const Dataset& d = dataset();
    const std::string dir = "train_" + task_tag(target);
    std::filesystem::create_directories(out_ / dir);
    const Partition inner =
        random_partition(d, cfg_.evolution.inner_k, derive_seed(cfg_.seed, 0x1272));

    TrainArtifacts art;
    if (!cfg_.fixed_genome.empty()) {
      art.genome = PipelineGenome::parse(cfg_.fixed_genome);
      art.fitness = genome_fitness(art.genome, d, inner, target, cfg_.seed, cfg_.workers);
      write_file(dir + "/fitness_history.csv",
                 "# " + provenance() + "\ngeneration,best_fitness\n0," + format_double(art.fitness) + "\n");
    } else {
      EvolutionParams ep = cfg_.evolution;
      ep.seed = derive_seed(cfg_.seed, 0x6001);
      const EvolveResult ev = evolve(d, inner, cfg_.grammar, ep, target, cfg_.workers);
      art.genome = ev.best;
      art.fitness = ev.best_fitness;
      std::ostringstream hist;
      hist << "# " << provenance() << "\ngeneration,best_fitness\n";
      for (size_t g = 0; g < ev.history.size(); ++g)
        hist << g << "," << format_double(ev.history[g]) << "\n";
      write_file(dir + "/fitness_history.csv", hist.str());
      if (!ev.failures.empty()) {
        std::ostringstream fails;
        fails << "# " << provenance() << "\ngenome\n";
        for (const auto& f : ev.failures) fails << csv::quote(f) << "\n";
        write_file(dir + "/failed_genomes.csv", fails.str());
      }
      if (cfg_.refine) {
        const auto grid = cfg_.grammar.family_grid(art.genome.model.family);
        const GridSearchResult gs =
            grid_search(art.genome, grid, d, inner, target, derive_seed(cfg_.seed, 0x6002), cfg_.workers);
        std::ostringstream gcsv;
        gcsv << "# " << provenance() << "\ncell,genome,mean_cv_accuracy\n";
        for (size_t i = 0; i < grid.size(); ++i) {
          PipelineGenome g = art.genome;
          g.model = grid[i];
          gcsv << i << "," << csv::quote(g.canonical()) << "," << format_double(gs.accuracies[i]) << "\n";
        }
        write_file(dir + "/grid_search.csv", gcsv.str());
        art.genome.model = gs.best;
        art.fitness = gs.accuracies[gs.best_index];
      }
    }
    write_file(dir + "/best_genome.txt", art.genome.canonical() + "\n");
    art.pipeline = fit_pipeline(art.genome, d, target, derive_seed(cfg_.seed, 0x6003), cfg_.workers);
    write_file(dir + "/pipeline.txt", serialize_pipeline(art.pipeline));
    return art;
  }

  // -------------------------------------------------------------- evaluate
  EvaluationReport run_evaluate(const std::string& target) {
    const Dataset& d = dataset();
    const Partition part = partition();

    std::vector<std::shared_ptr<PredictionTool>> tools;
    MlToolOptions opt;
    opt.evolve_per_fold = cfg_.evolve_per_fold && cfg_.fixed_genome.empty();
    if (!cfg_.fixed_genome.empty()) opt.fixed_genome = PipelineGenome::parse(cfg_.fixed_genome);
    if (!opt.evolve_per_fold && cfg_.fixed_genome.empty()) {
      // reuse the genome selected by the train stage
      const auto genome_path = out_ / ("train_" + task_tag(target)) / "best_genome.txt";
      if (!std::filesystem::exists(genome_path))
        throw DataError("evaluate: [search] per_fold=false needs a train artifact or a fixed genome");
      opt.fixed_genome = PipelineGenome::parse(trim(read_file(genome_path.string())));
    }
    opt.grammar = cfg_.grammar;
    opt.evolution = cfg_.evolution;
    opt.refine = cfg_.refine;
    opt.fixed_threshold = cfg_.ml_fixed_threshold;
    opt.fit_threshold = cfg_.ml_fit_threshold;
    opt.workers = cfg_.workers;
    tools.push_back(std::make_shared<MlPipelineTool>(opt));
    for (const auto& name : cfg_.baselines)
      tools.push_back(std::make_shared<ScoreBaselineTool>(cfg_.score_definition(name), cfg_.score_policy));

    EvaluationReport report =
        kfold_evaluate(d, part, target, tools, derive_seed(cfg_.seed, 0xeba1));
    write_evaluation(report, target, part);
    return report;
  }

  // --------------------------------------------------------------- explain
  void run_explain(const std::string& target) {
    const Dataset& d = dataset();
    const Partition part = partition();
    const std::string tag = task_tag(target);

    PipelineGenome genome;
    FittedPipeline pipeline;
    const auto pipeline_path = out_ / ("train_" + tag) / "pipeline.txt";
    if (std::filesystem::exists(pipeline_path)) {
      pipeline = parse_pipeline(read_file(pipeline_path.string()));
      genome = pipeline.genome;
    } else if (!cfg_.fixed_genome.empty()) {
      genome = PipelineGenome::parse(cfg_.fixed_genome);
      pipeline = fit_pipeline(genome, d, target, derive_seed(cfg_.seed, 0x6003), cfg_.workers);
    } else {
      const TrainArtifacts art = run_train(target);
      genome = art.genome;
      pipeline = std::move(art.pipeline);
    }

    // noise-floor ablation: retrain the same genome on each feature-dropped copy
    const auto cv = [&](const Dataset& variant) {
      return pipeline_partition_accuracy(genome, variant, part, target, derive_seed(cfg_.seed, 0xab7e));
    };
    const ImportanceVector imp = ablation_importance(cv, d, cfg_.seed, cfg_.workers);
    std::ostringstream icsv;
    icsv << "# " << provenance() << "\nfeature,importance,raw_delta,zeroed\n";
    for (size_t i = 0; i < imp.features.size(); ++i) {
      const bool zeroed = imp.importance[i] == 0.0 && !imp.all_zeroed;
      icsv << csv::quote(imp.features[i]) << "," << format_double(imp.importance[i]) << ","
           << format_double(imp.raw_delta[i]) << "," << (zeroed ? 1 : 0) << "\n";
    }
    icsv << csv::join_row({"__noise__", "", format_double(imp.noise_delta), ""}) << "\n";
    write_file("importance_" + tag + ".csv", icsv.str());

    std::vector<std::pair<std::string, double>> bars;
    {
      std::vector<size_t> order(imp.features.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t a, size_t b) { return imp.importance[a] > imp.importance[b]; });
      for (size_t i = 0; i < order.size() && i < cfg_.top_features; ++i)
        if (imp.importance[order[i]] > 0)
          bars.push_back({imp.features[order[i]], imp.importance[order[i]]});
    }
    write_file("importance_" + tag + ".svg",
               svg::bar_plot(bars, "ablation importance (" + tag + ")", provenance()));

    // split-gain totals for comparison
    {
      const FeatureMatrix full = pipeline.transform(d);
      const auto totals = split_gain_totals(pipeline.model);
      std::ostringstream gcsv;
      gcsv << "# " << provenance() << "\nmodel_feature,gain_total\n";
      for (size_t c = 0; c < totals.size() && c < full.info.size(); ++c)
        gcsv << csv::quote(full.info[c].name) << "," << format_double(totals[c]) << "\n";
      write_file("gain_totals_" + tag + ".csv", gcsv.str());
    }

    // SHAP summary on a deterministic sample of records against a background set
    const FeatureMatrix full = pipeline.transform(d);
    Rng pick(derive_seed(cfg_.seed, 0x5a9));
    const size_t n_bg = std::min(cfg_.background_rows, full.n_rows());
    const size_t n_rec = std::min(cfg_.shap_records, full.n_rows());
    const auto bg_rows = pick.sample_without_replacement(full.n_rows(), n_bg);
    const auto rec_rows = pick.sample_without_replacement(full.n_rows(), n_rec);
    FeatureMatrix bg, recs;
    bg.info = recs.info = full.info;
    for (const auto& col : full.cols) {
      std::vector<double> b, r;
      for (size_t i : bg_rows) b.push_back(col[i]);
      for (size_t i : rec_rows) r.push_back(col[i]);
      bg.cols.push_back(std::move(b));
      recs.cols.push_back(std::move(r));
    }
    const ShapMatrix shap = shap_summary(pipeline.model, recs, bg, cfg_.workers);
    std::ostringstream scsv;
    scsv << "# " << provenance() << "\n";
    scsv << "# base=" << format_double(shap.base) << " space=" << shap.output_space << "\n";
    std::vector<std::string> header{"record"};
    for (size_t f : shap.order) header.push_back("phi:" + shap.feature_names[f]);
    for (size_t f : shap.order) header.push_back("value:" + shap.feature_names[f]);
    scsv << csv::join_row(header) << "\n";
    for (size_t r = 0; r < shap.phi.size(); ++r) {
      std::vector<std::string> row{std::to_string(rec_rows[r])};
      for (size_t f : shap.order) row.push_back(format_double(shap.phi[r][f]));
      for (size_t f : shap.order) row.push_back(format_double(shap.values[r][f]));
      scsv << csv::join_row(row) << "\n";
    }
    write_file("shap_" + tag + ".csv", scsv.str());
    write_file("shap_" + tag + ".svg",
               svg::shap_strip_plot(shap.feature_names, shap.phi, shap.values, shap.order,
                                    cfg_.top_features, "shap summary (" + tag + ")", provenance()));
  }

  // ---------------------------------------------------------------- scores
  void run_scores() {
    const Dataset& d = dataset();
    const BoundScore apfel(cfg_.apfel, d.schema());
    const BoundScore koiv(cfg_.koivuranta, d.schema());
    const BoundScore guid(cfg_.guideline, d.schema());
    std::ostringstream out;
    out << "# " << provenance() << "\nrecord_id,apfel,koivuranta,guideline\n";
    for (size_t r = 0; r < d.n_rows(); ++r)
      out << r << "," << apfel.score(d, r) << "," << koiv.score(d, r) << "," << guid.score(d, r)
          << "\n";
    write_file("scores.csv", out.str());
  }

  // ---------------------------------------------------------------- report
  void run_report() {
    json report;
    report["provenance"] = provenance_json();
    report["task"] = cfg_.task;
    std::ostringstream comparison;
    comparison << "# " << provenance() << "\ntask,tool,accuracy,recall,precision,f1,auc\n";
    for (const auto& target : cfg_.targets()) {
      const std::string tag = task_tag(target);
      const auto eval_path = out_ / ("evaluation_" + tag + ".json");
      if (std::filesystem::exists(eval_path)) {
        const json eval = json::parse(read_file(eval_path.string()));
        report["evaluation"][tag] = eval;
        for (const auto& tool : eval["tools"]) {
          comparison << tag << "," << tool["name"].get<std::string>() << ","
                     << format_double(tool["mean"]["accuracy"].get<double>()) << ","
                     << format_double(tool["mean"]["recall"].get<double>()) << ","
                     << format_double(tool["mean"]["precision"].get<double>()) << ","
                     << format_double(tool["mean"]["f1"].get<double>()) << ",";
          if (tool.contains("auc")) comparison << format_double(tool["auc"].get<double>());
          comparison << "\n";
        }
      }
      const auto imp_path = out_ / ("importance_" + tag + ".csv");
      if (std::filesystem::exists(imp_path)) {
        json imp = json::array();
        const auto rows = csv::read_file(imp_path.string());
        for (size_t i = 1; i < rows.size(); ++i) {
          bool ok = false;
          json item;
          item["feature"] = rows[i][0];
          item["importance"] = parse_double(rows[i][1], ok);
          item["raw_delta"] = parse_double(rows[i][2], ok);
          imp.push_back(item);
        }
        report["importance"][tag] = imp;
      }
    }
    const auto split_path = out_ / "split_summary.json";
    if (std::filesystem::exists(split_path))
      report["split"] = json::parse(read_file(split_path.string()));
    write_file("report.json", report.dump(2) + "\n");
    write_file("comparison.csv", comparison.str());
  }

  void run_all() {
    run_stats();
    run_split();
    for (const auto& target : cfg_.targets()) {
      run_train(target);
      run_evaluate(target);
      run_explain(target);
    }
    run_scores();
    run_report();
  }

  static std::string task_tag(const std::string& target) {
    return target == "PONV_PACU" ? "early" : "delayed";
  }

  // --------------------------------------------------------------- helpers
  void write_file(const std::string& rel, const std::string& content) {
    std::filesystem::create_directories(out_);
    const auto path = out_ / rel;
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << content;
  }

  static std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

 private:
  void write_evaluation(const EvaluationReport& report, const std::string& target, const Partition& part) {
    const std::string tag = task_tag(target);
    json j;
    j["provenance"] = provenance_json();
    j["target"] = target;
    j["task"] = tag;
    j["k"] = report.k;
    j["split_method"] = cfg_.split_method;
    j["partition_objective"] = cohort_distance(part, dataset());
    j["evaluated_folds"] = report.evaluated_folds;
    json skipped = json::array();
    for (const auto& [fold, why] : report.skipped_folds) {
      json s;
      s["fold"] = fold;
      s["reason"] = why;
      skipped.push_back(s);
    }
    j["skipped_folds"] = skipped;
    json tools = json::array();
    for (const auto& tr : report.tools) {
      json t;
      t["name"] = tr.name;
      json folds = json::array();
      for (size_t i = 0; i < tr.fold_metrics.size(); ++i) {
        json f;
        f["fold"] = tr.folds[i];
        f["tp"] = tr.fold_confusion[i].tp;
        f["fp"] = tr.fold_confusion[i].fp;
        f["tn"] = tr.fold_confusion[i].tn;
        f["fn"] = tr.fold_confusion[i].fn;
        f["accuracy"] = tr.fold_metrics[i].accuracy;
        f["recall"] = tr.fold_metrics[i].recall;
        f["precision"] = tr.fold_metrics[i].precision;
        f["f1"] = tr.fold_metrics[i].f1;
        f["threshold"] = tr.fold_thresholds[i];
        if (!tr.fold_details[i].empty()) f["genome"] = tr.fold_details[i];
        folds.push_back(f);
      }
      t["folds"] = folds;
      t["mean"]["accuracy"] = tr.mean.accuracy;
      t["mean"]["recall"] = tr.mean.recall;
      t["mean"]["precision"] = tr.mean.precision;
      t["mean"]["f1"] = tr.mean.f1;
      if (tr.auc_valid) t["auc"] = tr.pooled_auc;
      tools.push_back(t);
    }
    j["tools"] = tools;
    if (report.anova_valid) {
      j["anova"]["metric"] = "accuracy";
      j["anova"]["F"] = std::isfinite(report.anova_accuracy.f) ? json(report.anova_accuracy.f)
                                                               : json("infinite");
      j["anova"]["p"] = report.anova_accuracy.p;
      j["anova"]["zero_within_variance"] = report.anova_accuracy.zero_within_variance;
    }
    write_file("evaluation_" + tag + ".json", j.dump(2) + "\n");

    // Table-2 style metric rows
    std::ostringstream mcsv;
    mcsv << "# " << provenance() << "\ntool,fold,accuracy,recall,precision,f1,threshold\n";
    for (const auto& tr : report.tools) {
      for (size_t i = 0; i < tr.fold_metrics.size(); ++i)
        mcsv << tr.name << "," << tr.folds[i] << "," << format_double(tr.fold_metrics[i].accuracy)
             << "," << format_double(tr.fold_metrics[i].recall) << ","
             << format_double(tr.fold_metrics[i].precision) << ","
             << format_double(tr.fold_metrics[i].f1) << "," << format_double(tr.fold_thresholds[i])
             << "\n";
      mcsv << tr.name << ",mean," << format_double(tr.mean.accuracy) << ","
           << format_double(tr.mean.recall) << "," << format_double(tr.mean.precision) << ","
           << format_double(tr.mean.f1) << ",\n";
    }
    write_file("metrics_" + tag + ".csv", mcsv.str());

    std::ostringstream rcsv;
    rcsv << "# " << provenance() << "\ntool,fpr,tpr\n";
    std::vector<std::pair<std::string, const RocCurve*>> curves;
    for (const auto& tr : report.tools) {
      if (!tr.auc_valid) continue;
      curves.push_back({tr.name, &tr.roc});
      for (const auto& [fpr, tpr] : tr.roc.points)
        rcsv << tr.name << "," << format_double(fpr) << "," << format_double(tpr) << "\n";
    }
    write_file("roc_" + tag + ".csv", rcsv.str());
    write_file("roc_" + tag + ".svg", svg::roc_plot(curves, "ROC (" + tag + ")", provenance()));
  }

  RunConfig cfg_;
  std::filesystem::path out_;
  std::optional<Dataset> data_;
};

}  // namespace ponv
