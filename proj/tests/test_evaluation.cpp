// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "ponv/evaluation.hpp"

using namespace ponv;
using ponv::testing::make_dataset;
using ponv::testing::tiny_schema;

namespace {

// exhaustive pairwise-counting AUC oracle
double auc_pairwise(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (size_t i = 0; i < s.size(); ++i)
    for (size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1;
      else if (s[i] == s[j]) wins += 0.5;
    }
  return wins / pairs;
}

// step-by-step ANOVA table oracle
std::pair<double, double> anova_oracle_f(const std::vector<std::vector<double>>& groups) {
  size_t n = 0;
  double sum = 0;
  for (const auto& g : groups)
    for (double v : g) {
      sum += v;
      ++n;
    }
  const double grand = sum / double(n);
  double ssb = 0, ssw = 0;
  for (const auto& g : groups) {
    double gs = 0;
    for (double v : g) gs += v;
    const double mean = gs / double(g.size());
    ssb += double(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }
  const double df1 = double(groups.size() - 1);
  const double df2 = double(n - groups.size());
  return {(ssb / df1) / (ssw / df2), df2};
}

}  // namespace

TEST_CASE("metrics: hand-computed confusion example", "[evaluation]") {
  const Metrics m = metrics({2, 1, 6, 1});
  REQUIRE(m.accuracy == Catch::Approx(0.8).margin(1e-15));
  REQUIRE(m.precision == Catch::Approx(2.0 / 3.0).margin(1e-15));
  REQUIRE(m.recall == Catch::Approx(2.0 / 3.0).margin(1e-15));
  REQUIRE(m.f1 == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("metrics: perfect classifier", "[evaluation]") {
  const Metrics m = metrics({42, 0, 0, 0});
  REQUIRE(m.accuracy == 1.0);
  REQUIRE(m.recall == 1.0);
  REQUIRE(m.precision == 1.0);
  REQUIRE(m.f1 == 1.0);
}

TEST_CASE("metrics: zero-division cells flagged, not thrown", "[evaluation]") {
  const Metrics m = metrics({0, 0, 5, 3});  // never predicts positive
  REQUIRE(m.precision == 0.0);
  REQUIRE(m.precision_zeroed);
  REQUIRE_FALSE(m.recall_zeroed);
  const Metrics n = metrics({0, 2, 5, 0});  // no actual positives
  REQUIRE(n.recall == 0.0);
  REQUIRE(n.recall_zeroed);
  REQUIRE_THROWS_AS(metrics({0, 0, 0, 0}), ContractError);
}

TEST_CASE("auc: worked examples", "[evaluation]") {
  REQUIRE(auc({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  REQUIRE(auc({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
  REQUIRE(auc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == Catch::Approx(0.75).margin(1e-15));
  REQUIRE_THROWS_AS(auc({0.1, 0.2}, {1, 1}), ContractError);
}

TEST_CASE("auc: trapezoidal ROC agrees with the rank statistic to 1e-12", "[evaluation][oracle]") {
  Rng rng(55);
  for (int trial = 0; trial < 300; ++trial) {
    const size_t n = 5 + rng.below(120);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool pos = false, neg = false;
    for (size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.normal() * 4.0) / 4.0;  // force ties
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
      (y[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    const double rank_auc = auc(s, y);
    const RocCurve roc = roc_curve(s, y);
    REQUIRE(std::fabs(rank_auc - roc.auc) <= 1e-12);
    REQUIRE(std::fabs(rank_auc - auc_pairwise(s, y)) <= 1e-12);
  }
}

TEST_CASE("auc: invariant under strictly increasing transforms", "[evaluation][property]") {
  Rng rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 10 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool pos = false, neg = false;
    for (size_t i = 0; i < n; ++i) {
      s[i] = rng.normal();
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
      (y[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    std::vector<double> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = std::exp(2.0 * s[i]) + 3.0;
    REQUIRE(std::fabs(auc(s, y) - auc(t, y)) <= 1e-12);
  }
}

TEST_CASE("roc: endpoints and monotonicity on random sets", "[evaluation][property]") {
  Rng rng(57);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 4 + rng.below(50);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool pos = false, neg = false;
    for (size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.normal() * 3.0) / 3.0;
      y[i] = rng.bernoulli(0.5) ? 1 : 0;
      (y[i] ? pos : neg) = true;
    }
    if (!pos || !neg) continue;
    const RocCurve roc = roc_curve(s, y);
    REQUIRE(roc.points.front() == std::pair<double, double>{0.0, 0.0});
    REQUIRE(roc.points.back() == std::pair<double, double>{1.0, 1.0});
    for (size_t i = 1; i < roc.points.size(); ++i) {
      REQUIRE(roc.points[i].first >= roc.points[i - 1].first);
      REQUIRE(roc.points[i].second >= roc.points[i - 1].second);
    }
    REQUIRE(roc.auc >= 0.0);
    REQUIRE(roc.auc <= 1.0);
  }
}

TEST_CASE("anova: identical groups give F=0, p=1", "[evaluation]") {
  const AnovaResult r = anova_oneway({{1, 2, 3}, {1, 2, 3}});
  REQUIRE(r.f == 0.0);
  REQUIRE(r.p == 1.0);
}

TEST_CASE("anova: zero within-variance with differing means gives p=0 flagged", "[evaluation]") {
  const AnovaResult r = anova_oneway({{0, 0, 0}, {1, 1, 1}});
  REQUIRE(r.zero_within_variance);
  REQUIRE(std::isinf(r.f));
  REQUIRE(r.p == 0.0);
}

TEST_CASE("anova: textbook example against the step-by-step oracle", "[evaluation][oracle]") {
  const std::vector<std::vector<double>> groups{{3, 4, 5}, {6, 7, 8}};
  const AnovaResult r = anova_oneway(groups);
  const auto [f_expect, df2] = anova_oracle_f(groups);
  REQUIRE(std::fabs(r.f - f_expect) <= 1e-9);
  REQUIRE(f_expect == Catch::Approx(13.5).margin(1e-12));
  (void)df2;
  // P(F(1,4) > 13.5) = P(|t(4)| > sqrt(13.5))
  REQUIRE(r.p == Catch::Approx(0.021312).margin(2e-6));
}

TEST_CASE("anova: contract errors", "[evaluation]") {
  REQUIRE_THROWS_AS(anova_oneway({{1, 2, 3}}), ContractError);
  REQUIRE_THROWS_AS(anova_oneway({{1}, {2, 3}}), ContractError);
}

TEST_CASE("incomplete beta: reference values", "[evaluation]") {
  // I_x(a,b) checks: I_0.5(1,1)=0.5; I_x(1,b) = 1-(1-x)^b
  REQUIRE(regularized_incomplete_beta(1, 1, 0.5) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(regularized_incomplete_beta(1, 3, 0.2) == Catch::Approx(1 - std::pow(0.8, 3)).margin(1e-12));
  REQUIRE(regularized_incomplete_beta(2.5, 4.5, 0.3) ==
          Catch::Approx(0.40653901668245934).margin(1e-9));
}

TEST_CASE("kfold_evaluate: constant labels flag every fold", "[evaluation]") {
  const FeatureSchema s = tiny_schema();
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 12; ++i)
    rows.push_back({30.0 + i, double(i % 2), 0, 0, 0, 60, 0, 0, 0, 1, 1});  // all positive
  const Dataset d = make_dataset(s, rows);
  const Partition p = random_partition(d, 3, 1);
  std::vector<std::shared_ptr<PredictionTool>> tools{
      std::make_shared<ScoreBaselineTool>(apfel_definition(), ScoreThresholdPolicy{})};
  const EvaluationReport rep = kfold_evaluate(d, p, "PONV_PACU", tools, 1);
  REQUIRE(rep.evaluated_folds.empty());
  REQUIRE(rep.skipped_folds.size() == 3);
  REQUIRE_FALSE(rep.anova_valid);
}

TEST_CASE("kfold_evaluate: two-fold trace matches a by-hand confusion count", "[evaluation][oracle]") {
  const FeatureSchema s = tiny_schema();
  // AGE GENDER SMOKE HX MIGRAINE DUR POSTOPI INHALE NITROUS PACU 24H
  // apfel score = female + nonsmoker + hx + postopi; fixed threshold 2
  std::vector<std::vector<double>> rows = {
      {30, 1, 0, 0, 0, 60, 0, 0, 0, 1, 0},  // score 2 -> pred 1, label 1 (TP)
      {30, 0, 1, 0, 0, 60, 0, 0, 0, 0, 0},  // score 0 -> pred 0, label 0 (TN)
      {30, 1, 0, 1, 0, 60, 1, 0, 0, 0, 0},  // score 4 -> pred 1, label 0 (FP)
      {30, 0, 0, 0, 0, 60, 0, 0, 0, 1, 0},  // score 1 -> pred 0, label 1 (FN)
      {30, 1, 0, 0, 0, 60, 1, 0, 0, 1, 0},  // score 3 -> pred 1, label 1 (TP)
      {30, 0, 1, 0, 0, 60, 0, 0, 0, 0, 0},  // score 0 -> pred 0, label 0 (TN)
      {30, 1, 1, 0, 0, 60, 0, 0, 0, 0, 0},  // score 1 -> pred 0, label 0 (TN)
      {30, 0, 0, 1, 0, 60, 1, 0, 0, 1, 0},  // score 3 -> pred 1, label 1 (TP)
  };
  const Dataset d = make_dataset(s, rows);
  // fold 0 = rows 0..3, fold 1 = rows 4..7
  const Partition p = Partition::build(d, 2, {0, 0, 0, 0, 1, 1, 1, 1});
  ScoreThresholdPolicy fixed2;
  fixed2.kind = ScoreThresholdPolicy::Kind::fixed;
  fixed2.fixed_value = 2;
  std::vector<std::shared_ptr<PredictionTool>> tools{
      std::make_shared<ScoreBaselineTool>(apfel_definition(), fixed2)};
  const EvaluationReport rep = kfold_evaluate(d, p, "PONV_PACU", tools, 0);
  REQUIRE(rep.evaluated_folds.size() == 2);
  const ToolReport& tr = rep.tools[0];
  // fold 0 validates rows 0-3: TP=1 TN=1 FP=1 FN=1
  REQUIRE(tr.fold_confusion[0].tp == 1);
  REQUIRE(tr.fold_confusion[0].tn == 1);
  REQUIRE(tr.fold_confusion[0].fp == 1);
  REQUIRE(tr.fold_confusion[0].fn == 1);
  // fold 1 validates rows 4-7: TP=2 TN=2
  REQUIRE(tr.fold_confusion[1].tp == 2);
  REQUIRE(tr.fold_confusion[1].tn == 2);
  REQUIRE(tr.fold_confusion[1].fp == 0);
  REQUIRE(tr.fold_confusion[1].fn == 0);
  REQUIRE(tr.mean.accuracy == Catch::Approx((0.5 + 1.0) / 2).margin(1e-12));
}

TEST_CASE("kfold_evaluate: report means equal the arithmetic fold means", "[evaluation][property]") {
  SynthConfig cfg;
  cfg.n = 250;
  cfg.informative = 3;
  cfg.noise = 2;
  cfg.prevalence_early = 0.35;
  cfg.prevalence_delayed = 0.35;
  const Dataset d = synth_generate(cfg, 19);
  const Partition p = random_partition(d, 5, 2);
  MlToolOptions opt;
  opt.evolve_per_fold = false;
  opt.fixed_genome = PipelineGenome::parse(
      "imp=median_mode|scl=none|sel=none|model=tree(depth=4,min_leaf=5,prune=0)");
  std::vector<std::shared_ptr<PredictionTool>> tools{
      std::make_shared<MlPipelineTool>(opt),
      std::make_shared<ScoreBaselineTool>(apfel_definition(), ScoreThresholdPolicy{}),
      std::make_shared<ScoreBaselineTool>(koivuranta_definition(), ScoreThresholdPolicy{})};
  const EvaluationReport rep = kfold_evaluate(d, p, "PONV_PACU", tools, 3);
  for (const auto& tr : rep.tools) {
    REQUIRE(tr.fold_metrics.size() == 5);
    double acc = 0, rec = 0, prec = 0, f1 = 0;
    for (const auto& m : tr.fold_metrics) {
      acc += m.accuracy;
      rec += m.recall;
      prec += m.precision;
      f1 += m.f1;
    }
    REQUIRE(std::fabs(tr.mean.accuracy - acc / 5) <= 1e-12);
    REQUIRE(std::fabs(tr.mean.recall - rec / 5) <= 1e-12);
    REQUIRE(std::fabs(tr.mean.precision - prec / 5) <= 1e-12);
    REQUIRE(std::fabs(tr.mean.f1 - f1 / 5) <= 1e-12);
    REQUIRE(tr.auc_valid);
    REQUIRE(tr.roc.points.front().first == 0.0);
  }
  REQUIRE(rep.anova_valid);
  REQUIRE(rep.anova_accuracy.p >= 0.0);
  REQUIRE(rep.anova_accuracy.p <= 1.0);
}

TEST_CASE("ml tool: fitted probability threshold maximizes training F1", "[evaluation]") {
  Rng rng(60);
  std::vector<double> probs(100);
  std::vector<int> labels(100);
  for (size_t i = 0; i < 100; ++i) {
    probs[i] = rng.uniform();
    labels[i] = rng.bernoulli(probs[i]) ? 1 : 0;
  }
  const double t = MlPipelineTool::fit_probability_threshold(probs, labels);
  auto f1_at = [&](double cut) {
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < 100; ++i) {
      const bool pred = probs[i] >= cut;
      if (pred && labels[i]) ++tp;
      else if (pred && !labels[i]) ++fp;
      else if (!pred && labels[i]) ++fn;
    }
    const double denom = double(2 * tp + fp + fn);
    return denom > 0 ? 2.0 * double(tp) / denom : 0.0;
  };
  const double got = f1_at(t);
  for (double cand : probs) REQUIRE(got >= f1_at(cand) - 1e-12);
}
