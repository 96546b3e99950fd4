// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "ponv/explain.hpp"

using namespace ponv;
using ponv::testing::matrix_of;

namespace {

FeatureMatrix random_matrix(Rng& rng, size_t p, size_t n) {
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  for (auto& col : cols)
    for (auto& v : col) v = rng.normal();
  return matrix_of(cols);
}

}  // namespace

TEST_CASE("shap: single-feature stump is a single-player game", "[explain]") {
  // stump on feature 0: left 0.2, right 0.9
  TreeEnsemble ens;
  ens.kind = EnsembleKind::single;
  ens.n_features = 3;
  DecisionTree t;
  TreeNode root;
  root.feature = 0;
  root.threshold = 0.0;
  root.left = 1;
  root.right = 2;
  t.nodes.push_back(root);
  TreeNode l, r;
  l.value = 0.2;
  r.value = 0.9;
  t.nodes.push_back(l);
  t.nodes.push_back(r);
  ens.trees.push_back(t);

  FeatureMatrix bg = matrix_of({{-1, -2, 1}, {0, 0, 0}, {5, 5, 5}});
  const std::vector<double> x{2.0, 9.0, -4.0};
  const ShapValues sv = shap_tree(ens, x, bg);
  // base = mean over bg of f(z) = (0.2+0.2+0.9)/3
  REQUIRE(sv.base == Catch::Approx((0.2 + 0.2 + 0.9) / 3.0).margin(1e-12));
  REQUIRE(sv.phi[0] == Catch::Approx(sv.prediction - sv.base).margin(1e-12));
  REQUIRE(sv.phi[1] == 0.0);
  REQUIRE(sv.phi[2] == 0.0);
}

TEST_CASE("shap: record equal to the only background row has zero attributions", "[explain]") {
  Rng rng(70);
  FeatureMatrix m = random_matrix(rng, 4, 60);
  std::vector<int> y(60);
  for (size_t i = 0; i < 60; ++i) y[i] = rng.bernoulli(m.cols[0][i] > 0 ? 0.8 : 0.2) ? 1 : 0;
  ModelSpec spec;
  spec.family = ModelFamily::forest;
  spec.n_trees = 12;
  spec.max_depth = 4;
  const TreeEnsemble ens = fit_model(m, y, spec, 5);
  const std::vector<double> x = m.row(7);
  FeatureMatrix bg;
  bg.info = m.info;
  for (const auto& col : m.cols) bg.cols.push_back({col[7]});
  const ShapValues sv = shap_tree(ens, x, bg);
  for (double phi : sv.phi) REQUIRE(phi == 0.0);
  REQUIRE(sv.base == Catch::Approx(sv.prediction).margin(1e-12));
}

TEST_CASE("shap: depth-3 tree with six features matches the coalition oracle", "[explain][oracle]") {
  Rng rng(71);
  FeatureMatrix m = random_matrix(rng, 6, 80);
  std::vector<int> y(80);
  for (size_t i = 0; i < 80; ++i)
    y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-(m.cols[0][i] + m.cols[3][i])))) ? 1 : 0;
  TreeParams params;
  params.max_depth = 3;
  std::vector<size_t> rows(80);
  for (size_t i = 0; i < 80; ++i) rows[i] = i;
  TreeEnsemble ens;
  ens.kind = EnsembleKind::single;
  ens.n_features = 6;
  ens.trees.push_back(fit_classification_tree(m, y, rows, params));

  FeatureMatrix bg;
  bg.info = m.info;
  for (const auto& col : m.cols) bg.cols.push_back({col.begin(), col.begin() + 5});
  for (int rec = 0; rec < 10; ++rec) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal();
    const ShapValues fast = shap_tree(ens, x, bg);
    const ShapValues brute = shap_brute(ens, x, bg);
    for (size_t f = 0; f < 6; ++f)
      REQUIRE(std::fabs(fast.phi[f] - brute.phi[f]) <= 1e-9);
  }
}

TEST_CASE("shap: symmetric players receive equal attributions", "[explain]") {
  // two trees, each stumping on one of two clone features with the same cut
  auto stump = [](int feature) {
    DecisionTree t;
    TreeNode root;
    root.feature = feature;
    root.threshold = 0.5;
    root.left = 1;
    root.right = 2;
    t.nodes.push_back(root);
    TreeNode l, r;
    l.value = 0.1;
    r.value = 0.8;
    t.nodes.push_back(l);
    t.nodes.push_back(r);
    return t;
  };
  TreeEnsemble ens;
  ens.kind = EnsembleKind::forest;
  ens.n_features = 2;
  ens.trees.push_back(stump(0));
  ens.trees.push_back(stump(1));

  FeatureMatrix bg = matrix_of({{0.0, 0.0}, {0.0, 0.0}});  // duplicated background
  const std::vector<double> x{1.0, 1.0};                   // duplicated record
  const ShapValues fast = shap_tree(ens, x, bg);
  const ShapValues brute = shap_brute(ens, x, bg);
  REQUIRE(fast.phi[0] == Catch::Approx(fast.phi[1]).margin(1e-12));
  REQUIRE(brute.phi[0] == Catch::Approx(brute.phi[1]).margin(1e-12));
  REQUIRE(std::fabs(fast.phi[0] - brute.phi[0]) <= 1e-12);
}

TEST_CASE("shap: dummy feature gets exactly zero", "[explain]") {
  Rng rng(72);
  FeatureMatrix m = random_matrix(rng, 5, 70);
  // feature 4 duplicates feature 0 in the data, but only 0..2 carry signal
  std::vector<int> y(70);
  for (size_t i = 0; i < 70; ++i) y[i] = m.cols[0][i] + m.cols[1][i] > 0 ? 1 : 0;
  ModelSpec spec;
  spec.family = ModelFamily::boosted;
  spec.n_trees = 12;
  spec.max_depth = 2;
  spec.learning_rate = 0.5;
  const TreeEnsemble ens = fit_model(m, y, spec, 2);
  // find a feature never split on
  std::vector<bool> used(5, false);
  for (const auto& t : ens.trees)
    for (const auto& nd : t.nodes)
      if (!nd.is_leaf()) used[size_t(nd.feature)] = true;
  FeatureMatrix bg;
  bg.info = m.info;
  for (const auto& col : m.cols) bg.cols.push_back({col.begin(), col.begin() + 4});
  bool found_dummy = false;
  for (size_t f = 0; f < 5; ++f) {
    if (used[f]) continue;
    found_dummy = true;
    for (int rec = 0; rec < 5; ++rec) {
      std::vector<double> x(5);
      for (auto& v : x) v = rng.normal();
      REQUIRE(shap_tree(ens, x, bg).phi[f] == 0.0);
      REQUIRE(std::fabs(shap_brute(ens, x, bg).phi[f]) <= 1e-12);
    }
  }
  REQUIRE(found_dummy);
}

TEST_CASE("shap: tree and brute agree across random small models", "[explain][oracle]") {
  Rng rng(73);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t p = 2 + rng.below(9);
    const size_t n = 40 + rng.below(60);
    FeatureMatrix m = random_matrix(rng, p, n);
    std::vector<int> y(n);
    bool has0 = false, has1 = false;
    for (size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.3 + 0.4 * (m.cols[0][i] > 0)) ? 1 : 0;
      (y[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    ModelSpec spec;
    const auto fam = rng.below(3);
    spec.family = fam == 0 ? ModelFamily::tree : fam == 1 ? ModelFamily::forest : ModelFamily::boosted;
    spec.n_trees = 6;
    spec.max_depth = 2 + int(rng.below(3));
    spec.learning_rate = 0.3;
    const TreeEnsemble ens = fit_model(m, y, spec, rng.next_u64());
    FeatureMatrix bg;
    bg.info = m.info;
    const size_t bn = 1 + rng.below(4);
    for (const auto& col : m.cols) bg.cols.push_back({col.begin(), col.begin() + long(bn)});
    std::vector<double> x(p);
    for (auto& v : x) v = rng.normal();
    const ShapValues fast = shap_tree(ens, x, bg);
    const ShapValues brute = shap_brute(ens, x, bg);
    for (size_t f = 0; f < p; ++f) REQUIRE(std::fabs(fast.phi[f] - brute.phi[f]) <= 1e-9);
    double total = fast.base;
    for (double v : fast.phi) total += v;
    REQUIRE(std::fabs(total - fast.prediction) <= 1e-9);  // efficiency
  }
}

TEST_CASE("shap_brute: feature cap", "[explain]") {
  TreeEnsemble ens;
  ens.kind = EnsembleKind::constant;
  ens.n_features = 16;
  FeatureMatrix bg = matrix_of(std::vector<std::vector<double>>(16, {0.0}));
  REQUIRE_THROWS_AS(shap_brute(ens, std::vector<double>(16, 0.0), bg), ContractError);
}

TEST_CASE("shap_summary: constant model yields an all-zero matrix", "[explain]") {
  TreeEnsemble ens;
  ens.kind = EnsembleKind::constant;
  ens.constant_value = 0.4;
  ens.n_features = 3;
  FeatureMatrix data = matrix_of({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  const ShapMatrix sm = shap_summary(ens, data, data);
  for (const auto& row : sm.phi)
    for (double v : row) REQUIRE(v == 0.0);
  REQUIRE(sm.base == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("shap_summary: deterministic ordering, informative features on top", "[explain]") {
  SynthConfig cfg;
  cfg.n = 400;
  cfg.informative = 3;
  cfg.noise = 6;
  cfg.prevalence_early = 0.4;
  cfg.prevalence_delayed = 0.4;
  cfg.demographics = false;
  const Dataset d = synth_generate(cfg, 7);
  const PipelineGenome genome = PipelineGenome::parse(
      "imp=median_mode|scl=none|sel=none|model=boosted(depth=3,min_leaf=1,rounds=60,lr=0.3)");
  const FittedPipeline fitted = fit_pipeline(genome, d, "PONV_PACU", 3);
  const FeatureMatrix full = fitted.transform(d);
  FeatureMatrix bg, recs;
  bg.info = recs.info = full.info;
  for (const auto& col : full.cols) {
    bg.cols.push_back({col.begin(), col.begin() + 30});
    recs.cols.push_back({col.begin(), col.begin() + 100});
  }
  const ShapMatrix a = shap_summary(fitted.model, recs, bg);
  const ShapMatrix b = shap_summary(fitted.model, recs, bg, 4);  // workers must not matter
  REQUIRE(a.order == b.order);
  REQUIRE(a.phi == b.phi);
  // the three planted features take the top three ranks
  std::vector<std::string> top;
  for (size_t i = 0; i < 3; ++i) top.push_back(a.feature_names[a.order[i]]);
  std::sort(top.begin(), top.end());
  REQUIRE(top == std::vector<std::string>{"SIG_00", "SIG_01", "SIG_02"});
}

TEST_CASE("ablation: perfectly predictive feature gets weight one, noise zero", "[explain][oracle]") {
  // y is a threshold function of X0; X1 is pure noise
  FeatureSchema s;
  FeatureSpec x0, x1, t1, t2;
  x0.name = "X0";
  x0.kind = FeatureKind::continuous;
  x0.min = -100;
  x0.max = 100;
  x1 = x0;
  x1.name = "X1";
  t1.name = "PONV_PACU";
  t1.kind = FeatureKind::binary;
  t2.name = "PONV_24H";
  t2.kind = FeatureKind::binary;
  s.features = {x0, x1, t1, t2};
  s.targets = {"PONV_PACU", "PONV_24H"};
  s.rebuild_index();
  Rng rng(80);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 240; ++i) {
    const double v0 = rng.normal(), v1 = rng.normal();
    rows.push_back({v0, v1, v0 > 0 ? 1.0 : 0.0, 0.0});
  }
  rows[0][3] = 1.0;  // keep the second target two-class
  const Dataset d = ponv::testing::make_dataset(s, rows);
  const Partition p = random_partition(d, 3, 9);
  const PipelineGenome genome = PipelineGenome::parse(
      "imp=median_mode|scl=none|sel=none|model=tree(depth=2,min_leaf=5,prune=0)");
  const auto cv = [&](const Dataset& variant) {
    return pipeline_partition_accuracy(genome, variant, p, "PONV_PACU", 11);
  };
  const ImportanceVector imp = ablation_importance(cv, d, 17);
  REQUIRE(imp.features == std::vector<std::string>{"X0", "X1"});
  REQUIRE(imp.importance[0] == 1.0);
  REQUIRE(imp.importance[1] == 0.0);
  REQUIRE(imp.raw_delta[1] == 0.0);  // the tree never used X1: exact refit identity
}

TEST_CASE("ablation: duplicated predictive feature reproduces the redundancy limitation",
          "[explain]") {
  FeatureSchema s;
  FeatureSpec x0;
  x0.name = "X0";
  x0.kind = FeatureKind::continuous;
  x0.min = -100;
  x0.max = 100;
  FeatureSpec x0b = x0, t1 = x0, t2 = x0;
  x0b.name = "X0B";
  t1.name = "PONV_PACU";
  t1.kind = FeatureKind::binary;
  t1.min = t1.max = 0;
  t2.name = "PONV_24H";
  t2.kind = FeatureKind::binary;
  s.features = {x0, x0b, t1, t2};
  s.targets = {"PONV_PACU", "PONV_24H"};
  s.rebuild_index();
  Rng rng(81);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 240; ++i) {
    const double v = rng.normal();
    rows.push_back({v, v, v > 0 ? 1.0 : 0.0, 0.0});  // exact duplicate columns
  }
  rows[0][3] = 1.0;
  const Dataset d = ponv::testing::make_dataset(s, rows);
  const Partition p = random_partition(d, 3, 10);
  const PipelineGenome genome = PipelineGenome::parse(
      "imp=median_mode|scl=none|sel=none|model=tree(depth=2,min_leaf=5,prune=0)");
  const auto cv = [&](const Dataset& variant) {
    return pipeline_partition_accuracy(genome, variant, p, "PONV_PACU", 11);
  };
  const ImportanceVector imp = ablation_importance(cv, d, 18);
  // each copy is redundant: removing either leaves accuracy unchanged, so the
  // noise floor zeroes both and the fallback uniform vector is flagged
  REQUIRE(std::fabs(imp.raw_delta[0]) <= std::fabs(imp.noise_delta));
  REQUIRE(std::fabs(imp.raw_delta[1]) <= std::fabs(imp.noise_delta));
  REQUIRE(imp.all_zeroed);
}

TEST_CASE("ablation: importance sums to one whenever any entry is nonzero", "[explain][property]") {
  SynthConfig cfg;
  cfg.n = 300;
  cfg.informative = 2;
  cfg.noise = 3;
  cfg.prevalence_early = 0.4;
  cfg.prevalence_delayed = 0.4;
  cfg.demographics = false;
  const Dataset d = synth_generate(cfg, 15);
  const Partition p = random_partition(d, 3, 4);
  const PipelineGenome genome = PipelineGenome::parse(
      "imp=median_mode|scl=none|sel=top2|model=boosted(depth=2,min_leaf=1,rounds=40,lr=0.3)");
  const auto cv = [&](const Dataset& variant) {
    return pipeline_partition_accuracy(genome, variant, p, "PONV_PACU", 21);
  };
  const ImportanceVector imp = ablation_importance(cv, d, 22);
  double total = 0;
  bool any = false;
  for (double v : imp.importance) {
    total += v;
    any |= v > 0;
  }
  REQUIRE(any);
  REQUIRE(std::fabs(total - 1.0) <= 1e-9);
  if (!imp.all_zeroed)
    for (size_t i = 0; i < imp.importance.size(); ++i)
      if (std::fabs(imp.raw_delta[i]) < std::fabs(imp.noise_delta))
        REQUIRE(imp.importance[i] == 0.0);
}

TEST_CASE("split_gain_totals: dummies zero, used features positive", "[explain]") {
  Rng rng(82);
  FeatureMatrix m = random_matrix(rng, 4, 100);
  std::vector<int> y(100);
  for (size_t i = 0; i < 100; ++i) y[i] = m.cols[1][i] > 0 ? 1 : 0;
  ModelSpec spec;
  spec.family = ModelFamily::tree;
  spec.max_depth = 2;
  spec.min_samples_leaf = 5;
  const TreeEnsemble ens = fit_model(m, y, spec, 1);
  const auto totals = split_gain_totals(ens);
  REQUIRE(totals[1] > 0.0);
  std::vector<bool> used(4, false);
  for (const auto& t : ens.trees)
    for (const auto& nd : t.nodes)
      if (!nd.is_leaf()) used[size_t(nd.feature)] = true;
  for (size_t f = 0; f < 4; ++f)
    if (!used[f]) REQUIRE(totals[f] == 0.0);
}
