// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ponv/automl.hpp"
#include "ponv/scores.hpp"
#include "ponv/splitter.hpp"

namespace ponv {

struct ConfusionMatrix {
  size_t tp = 0, fp = 0, tn = 0, fn = 0;

  size_t total() const { return tp + fp + tn + fn; }

  static ConfusionMatrix from(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size()) throw ContractError("confusion: size mismatch");
    ConfusionMatrix c;
    for (size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == 1 && labels[i] == 1) ++c.tp;
      else if (preds[i] == 1 && labels[i] == 0) ++c.fp;
      else if (preds[i] == 0 && labels[i] == 0) ++c.tn;
      else ++c.fn;
    }
    return c;
  }
};

struct Metrics {
  double accuracy = 0, recall = 0, precision = 0, f1 = 0;
  bool precision_zeroed = false;  // TP+FP == 0
  bool recall_zeroed = false;     // TP+FN == 0
  bool f1_zeroed = false;
};

// Standard definitions; division-by-zero cells become 0 with a flag.
inline Metrics metrics(const ConfusionMatrix& c) {
  if (c.total() == 0) throw ContractError("metrics: empty confusion matrix");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn == 0) {
    m.recall_zeroed = true;
  } else {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  }
  if (c.tp + c.fp == 0) {
    m.precision_zeroed = true;
  } else {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  }
  const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
  if (denom == 0.0) {
    m.f1_zeroed = true;
  } else {
    m.f1 = 2.0 * static_cast<double>(c.tp) / denom;
  }
  return m;
}

// Rank-based AUC: P(score+ > score-) + 0.5 P(tie), via average ranks.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) throw ContractError("auc: bad inputs");
  size_t pos = 0;
  for (int y : labels) pos += y ? 1 : 0;
  const size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ContractError("auc: both classes must be present");
  const size_t n = scores.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (FPR, TPR), (0,0) .. (1,1)
  double auc = 0.0;                               // trapezoidal
};

// Threshold sweep from the highest score down; tied scores move diagonally in
// one step. The trapezoidal area must agree with the rank-based auc().
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) throw ContractError("roc: bad inputs");
  size_t pos = 0;
  for (int y : labels) pos += y ? 1 : 0;
  const size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw ContractError("roc: both classes must be present");
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  size_t tp = 0, fp = 0, i = 0;
  double area = 0.0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double fpr0 = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr0 = static_cast<double>(tp) / static_cast<double>(pos);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) ++tp;
      else ++fp;
    }
    const double fpr1 = static_cast<double>(fp) / static_cast<double>(neg);
    const double tpr1 = static_cast<double>(tp) / static_cast<double>(pos);
    area += (fpr1 - fpr0) * 0.5 * (tpr0 + tpr1);
    roc.points.push_back({fpr1, tpr1});
    i = j + 1;
  }
  roc.auc = area;
  return roc;
}

// ---------------------------------------------------------------------------
// One-way ANOVA with the p-value from first principles (log-gamma plus a
// Lentz continued fraction for the regularized incomplete beta).

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// modified Lentz evaluation of the standard continued fraction
inline double incomplete_beta_cf(double a, double b, double x) {
  const double fpmin = 1e-300, eps = 3e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= eps) break;
  }
  return h;
}

}  // namespace detail

inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractError("incomplete beta: a,b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::incomplete_beta_cf(a, b, x) / a;
  return 1.0 - front * detail::incomplete_beta_cf(b, a, 1.0 - x) / b;
}

// Upper tail P(F' > f) for F(df1, df2).
inline double f_distribution_upper_tail(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  const double x = df2 / (df2 + df1 * f);
  return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x);
}

struct AnovaResult {
  double f = 0.0;  // +inf when within-variance is zero with differing means
  double p = 1.0;
  bool zero_within_variance = false;
  bool all_equal = false;
};

inline AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ContractError("anova: need at least two groups");
  for (const auto& g : groups)
    if (g.size() < 2) throw ContractError("anova: every group needs at least two values");
  size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups)
    for (double v : g) {
      grand += v;
      ++n;
    }
  grand /= static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }
  const double df1 = static_cast<double>(groups.size() - 1);
  const double df2 = static_cast<double>(n - groups.size());
  AnovaResult r;
  if (ssw == 0.0) {
    if (ssb == 0.0) {
      r.all_equal = true;
      r.f = 0.0;
      r.p = 1.0;
    } else {
      r.zero_within_variance = true;
      r.f = std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.f = (ssb / df1) / (ssw / df2);
  r.p = f_distribution_upper_tail(r.f, df1, df2);
  return r;
}

// ---------------------------------------------------------------------------
// Outer k-fold orchestration

// A tool is retrained from scratch each fold on the training cohorts only and
// then scored on the held-out cohort.
struct FoldPrediction {
  std::vector<double> scores;  // risk scores on the validation rows
  std::vector<int> preds;      // binary decisions
  double threshold = 0.0;
  std::string detail;          // e.g. the genome chosen in this fold
};

class PredictionTool {
 public:
  virtual ~PredictionTool() = default;
  virtual std::string name() const = 0;
  virtual FoldPrediction run_fold(const Dataset& train, const Dataset& validation,
                                  const std::string& target, uint64_t seed) = 0;
};

class ScoreBaselineTool : public PredictionTool {
 public:
  ScoreBaselineTool(ScoreDefinition def, ScoreThresholdPolicy policy)
      : def_(std::move(def)), policy_(policy) {}

  std::string name() const override { return def_.name; }

  FoldPrediction run_fold(const Dataset& train, const Dataset& validation, const std::string& target,
                          uint64_t) override {
    const BoundScore bound(def_, train.schema());
    FoldPrediction out;
    int threshold = policy_.fixed_value;
    if (policy_.kind == ScoreThresholdPolicy::Kind::fit) {
      const auto train_scores = bound.score_all(train);
      const auto train_labels = train.labels(train.schema().index_of(target));
      threshold = fit_threshold_f1(train_scores, train_labels, def_.max_score);
    }
    const BoundScore bound_val(def_, validation.schema());
    const auto val_scores = bound_val.score_all(validation);
    out.scores.assign(val_scores.begin(), val_scores.end());
    out.preds = apply_threshold(val_scores, threshold);
    out.threshold = threshold;
    return out;
  }

 private:
  ScoreDefinition def_;
  ScoreThresholdPolicy policy_;
};

struct MlToolOptions {
  bool evolve_per_fold = true;      // re-run the genetic search inside each fold
  PipelineGenome fixed_genome;      // used when evolve_per_fold is false
  Grammar grammar = Grammar::defaults();
  EvolutionParams evolution;
  bool refine = true;               // grid-search the winner's model genes
  double fixed_threshold = 0.5;
  bool fit_threshold = false;       // fit on training-fold probabilities by F1
  unsigned workers = 1;
};

class MlPipelineTool : public PredictionTool {
 public:
  explicit MlPipelineTool(MlToolOptions opt) : opt_(std::move(opt)) {}

  std::string name() const override { return "pipeline"; }

  FoldPrediction run_fold(const Dataset& train, const Dataset& validation, const std::string& target,
                          uint64_t seed) override {
    PipelineGenome genome = opt_.fixed_genome;
    if (opt_.evolve_per_fold) {
      const Partition inner =
          random_partition(train, opt_.evolution.inner_k, derive_seed(seed, 0x1272));
      EvolutionParams ep = opt_.evolution;
      ep.seed = derive_seed(seed, 0x6001);
      const EvolveResult ev = evolve(train, inner, opt_.grammar, ep, target, opt_.workers);
      genome = ev.best;
      if (opt_.refine) {
        const auto grid = opt_.grammar.family_grid(genome.model.family);
        const auto refined =
            grid_search(genome, grid, train, inner, target, derive_seed(seed, 0x6002), opt_.workers);
        genome.model = refined.best;
      }
    }
    const FittedPipeline fitted = fit_pipeline(genome, train, target, derive_seed(seed, 0x6003));
    FoldPrediction out;
    out.detail = genome.canonical();
    out.scores = fitted.predict_proba(validation);
    double threshold = opt_.fixed_threshold;
    if (opt_.fit_threshold) {
      const auto train_probs = fitted.predict_proba(train);
      const auto train_labels = train.labels(train.schema().index_of(target));
      threshold = fit_probability_threshold(train_probs, train_labels);
    }
    out.threshold = threshold;
    out.preds.resize(out.scores.size());
    for (size_t i = 0; i < out.scores.size(); ++i) out.preds[i] = out.scores[i] >= threshold ? 1 : 0;
    return out;
  }

  // F1-maximizing probability cut; candidates are the observed scores, ties
  // toward the lower cut.
  static double fit_probability_threshold(const std::vector<double>& probs,
                                          const std::vector<int>& labels) {
    std::vector<double> candidates = probs;
    candidates.push_back(0.5);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    double best_t = 0.5, best_f1 = -1.0;
    for (double t : candidates) {
      size_t tp = 0, fp = 0, fn = 0;
      for (size_t i = 0; i < probs.size(); ++i) {
        const bool pred = probs[i] >= t;
        if (pred && labels[i] == 1) ++tp;
        else if (pred && labels[i] == 0) ++fp;
        else if (!pred && labels[i] == 1) ++fn;
      }
      const double denom = static_cast<double>(2 * tp + fp + fn);
      const double f1 = denom > 0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
      if (f1 > best_f1) {
        best_f1 = f1;
        best_t = t;
      }
    }
    return best_t;
  }

 private:
  MlToolOptions opt_;
};

struct ToolReport {
  std::string name;
  std::vector<int> folds;  // fold ids actually evaluated
  std::vector<ConfusionMatrix> fold_confusion;
  std::vector<Metrics> fold_metrics;
  std::vector<double> fold_thresholds;
  std::vector<std::string> fold_details;
  Metrics mean;            // arithmetic mean over evaluated folds
  double pooled_auc = 0.0; // over out-of-fold scores
  bool auc_valid = false;
  RocCurve roc;
};

struct EvaluationReport {
  std::string target;
  int k = 0;
  std::vector<int> evaluated_folds;
  std::vector<std::pair<int, std::string>> skipped_folds;
  std::vector<ToolReport> tools;
  AnovaResult anova_accuracy;
  bool anova_valid = false;
};

// Train on k-1 cohorts, evaluate on the held-out cohort, for every fold and
// tool; thresholds and searches see training folds only. Folds whose training
// side is single-class are skipped and reported.
inline EvaluationReport kfold_evaluate(const Dataset& d, const Partition& p,
                                       const std::string& target,
                                       const std::vector<std::shared_ptr<PredictionTool>>& tools,
                                       uint64_t seed) {
  if (p.assignment.size() != d.n_rows()) throw ContractError("kfold_evaluate: partition mismatch");
  EvaluationReport report;
  report.target = target;
  report.k = p.k;
  const size_t target_idx = d.schema().index_of(target);
  for (const auto& tool : tools) {
    ToolReport tr;
    tr.name = tool->name();
    report.tools.push_back(tr);
  }
  std::vector<std::vector<double>> pooled_scores(tools.size());
  std::vector<std::vector<int>> pooled_labels(tools.size());

  for (int fold = 0; fold < p.k; ++fold) {
    const auto train_rows = p.complement_rows(fold);
    const auto val_rows = p.cohort_rows(fold);
    bool single = true;
    for (size_t i = 1; i < train_rows.size(); ++i)
      single &= d.value(target_idx, train_rows[i]) == d.value(target_idx, train_rows[0]);
    if (single) {
      report.skipped_folds.push_back({fold, "single-class training data"});
      continue;
    }
    const Dataset train = d.subset(train_rows);
    const Dataset validation = d.subset(val_rows);
    const auto val_labels = validation.labels(validation.schema().index_of(target));
    report.evaluated_folds.push_back(fold);
    for (size_t t = 0; t < tools.size(); ++t) {
      FoldPrediction fp =
          tools[t]->run_fold(train, validation, target, derive_seed(seed, static_cast<uint64_t>(fold)));
      ToolReport& tr = report.tools[t];
      tr.folds.push_back(fold);
      tr.fold_confusion.push_back(ConfusionMatrix::from(fp.preds, val_labels));
      tr.fold_metrics.push_back(metrics(tr.fold_confusion.back()));
      tr.fold_thresholds.push_back(fp.threshold);
      tr.fold_details.push_back(fp.detail);
      pooled_scores[t].insert(pooled_scores[t].end(), fp.scores.begin(), fp.scores.end());
      pooled_labels[t].insert(pooled_labels[t].end(), val_labels.begin(), val_labels.end());
    }
  }

  for (size_t t = 0; t < report.tools.size(); ++t) {
    ToolReport& tr = report.tools[t];
    const size_t nf = tr.fold_metrics.size();
    if (nf > 0) {
      for (const auto& m : tr.fold_metrics) {
        tr.mean.accuracy += m.accuracy;
        tr.mean.recall += m.recall;
        tr.mean.precision += m.precision;
        tr.mean.f1 += m.f1;
      }
      tr.mean.accuracy /= static_cast<double>(nf);
      tr.mean.recall /= static_cast<double>(nf);
      tr.mean.precision /= static_cast<double>(nf);
      tr.mean.f1 /= static_cast<double>(nf);
    }
    bool pos = false, neg = false;
    for (int y : pooled_labels[t]) (y ? pos : neg) = true;
    if (pos && neg && !pooled_scores[t].empty()) {
      tr.roc = roc_curve(pooled_scores[t], pooled_labels[t]);
      tr.pooled_auc = auc(pooled_scores[t], pooled_labels[t]);
      tr.auc_valid = true;
    }
  }

  // one-way ANOVA across tools on per-fold accuracies
  if (report.evaluated_folds.size() >= 2 && report.tools.size() >= 2) {
    std::vector<std::vector<double>> groups;
    for (const auto& tr : report.tools) {
      std::vector<double> accs;
      for (const auto& m : tr.fold_metrics) accs.push_back(m.accuracy);
      groups.push_back(std::move(accs));
    }
    report.anova_accuracy = anova_oneway(groups);
    report.anova_valid = true;
  }
  return report;
}

}  // namespace ponv
