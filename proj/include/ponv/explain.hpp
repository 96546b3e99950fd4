// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ponv/common.hpp"
#include "ponv/model.hpp"
#include "ponv/pipeline.hpp"
#include "ponv/splitter.hpp"

namespace ponv {

// ---------------------------------------------------------------------------
// Exact interventional Shapley values for tree ensembles.
//
// For one record x and one background row z, a root-to-leaf path is reachable
// iff every split where x and z diverge takes x's direction for features in
// the coalition and z's direction otherwise. Each reachable leaf therefore
// defines a conjunction game over the distinct diverging features (P must be
// present, N must be absent), whose Shapley values have the closed form
//   i in P:  leaf * (|P|-1)! |N|! / (|P|+|N|)!
//   i in N: -leaf * |P|! (|N|-1)! / (|P|+|N|)!
// independent of the total feature count (dummies do not shift the values).

namespace detail {

class ShapCoefficients {
 public:
  explicit ShapCoefficients(size_t max_depth) {
    fact_.resize(max_depth + 2, 1.0);
    for (size_t i = 1; i < fact_.size(); ++i) fact_[i] = fact_[i - 1] * static_cast<double>(i);
  }

  double pos(size_t p, size_t n) const { return fact_[p - 1] * fact_[n] / fact_[p + n]; }
  double neg(size_t p, size_t n) const { return fact_[p] * fact_[n - 1] / fact_[p + n]; }

 private:
  std::vector<double> fact_;
};

struct ShapPathState {
  std::vector<int> pos, neg;  // distinct feature indices with sign requirements
};

inline void shap_tree_recurse(const DecisionTree& tree, int node_idx, const std::vector<double>& x,
                              const std::vector<double>& z, ShapPathState& state,
                              const ShapCoefficients& coef, double scale, std::vector<double>& phi) {
  const TreeNode& nd = tree.nodes[static_cast<size_t>(node_idx)];
  if (nd.is_leaf()) {
    const size_t p = state.pos.size(), n = state.neg.size();
    if (p + n == 0) return;  // leaf reached by both x and z: no attribution
    if (p > 0) {
      const double c = coef.pos(p, n) * nd.value * scale;
      for (int i : state.pos) phi[static_cast<size_t>(i)] += c;
    }
    if (n > 0) {
      const double c = coef.neg(p, n) * nd.value * scale;
      for (int i : state.neg) phi[static_cast<size_t>(i)] -= c;
    }
    return;
  }
  const size_t f = static_cast<size_t>(nd.feature);
  const bool x_left = DecisionTree::goes_left(nd, x[f]);
  const bool z_left = DecisionTree::goes_left(nd, z[f]);
  if (x_left == z_left) {
    shap_tree_recurse(tree, x_left ? nd.left : nd.right, x, z, state, coef, scale, phi);
    return;
  }
  const bool in_pos = std::find(state.pos.begin(), state.pos.end(), nd.feature) != state.pos.end();
  const bool in_neg = std::find(state.neg.begin(), state.neg.end(), nd.feature) != state.neg.end();
  // x's side requires the feature in the coalition
  if (!in_neg) {
    const bool push = !in_pos;
    if (push) state.pos.push_back(nd.feature);
    shap_tree_recurse(tree, x_left ? nd.left : nd.right, x, z, state, coef, scale, phi);
    if (push) state.pos.pop_back();
  }
  // z's side requires the feature outside the coalition
  if (!in_pos) {
    const bool push = !in_neg;
    if (push) state.neg.push_back(nd.feature);
    shap_tree_recurse(tree, z_left ? nd.left : nd.right, x, z, state, coef, scale, phi);
    if (push) state.neg.pop_back();
  }
}

}  // namespace detail

struct ShapValues {
  std::vector<double> phi;  // one per model feature
  double base = 0.0;        // expected model output over the background set
  double prediction = 0.0;  // model output for the record (same space as base)
};

// Attributions are in probability space for single trees and forests and in
// log-odds (pre-sigmoid) space for boosted ensembles; `base` and `prediction`
// use the same space, so base + sum(phi) == prediction either way.
inline ShapValues shap_tree(const TreeEnsemble& m, const std::vector<double>& x,
                            const FeatureMatrix& background) {
  if (background.n_rows() == 0) throw ContractError("shap_tree: background must be non-empty");
  const size_t p = static_cast<size_t>(m.n_features);
  if (x.size() != p) throw ContractError("shap_tree: record width mismatch");
  ShapValues out;
  out.phi.assign(p, 0.0);

  size_t max_depth = 1;
  for (const auto& t : m.trees) max_depth = std::max<size_t>(max_depth, static_cast<size_t>(t.max_depth()) + 1);
  const detail::ShapCoefficients coef(max_depth + 1);

  const double bg_weight = 1.0 / static_cast<double>(background.n_rows());
  std::vector<double> z(p);
  double base = 0.0;
  for (size_t r = 0; r < background.n_rows(); ++r) {
    for (size_t c = 0; c < p; ++c) z[c] = background.cols[c][r];
    base += m.score(z) * bg_weight;
    detail::ShapPathState state;
    for (size_t t = 0; t < m.trees.size(); ++t) {
      double scale = bg_weight;
      if (m.kind == EnsembleKind::forest) scale /= static_cast<double>(m.trees.size());
      if (m.kind == EnsembleKind::boosted) scale *= m.tree_weights[t];
      detail::shap_tree_recurse(m.trees[t], 0, x, z, state, coef, scale, out.phi);
    }
  }
  out.base = base;
  out.prediction = m.score(x);
  return out;
}

// Brute-force oracle: full coalition enumeration with the interventional
// value function (out-of-coalition features marginalized over the background).
inline ShapValues shap_brute(const TreeEnsemble& m, const std::vector<double>& x,
                             const FeatureMatrix& background) {
  const size_t p = static_cast<size_t>(m.n_features);
  if (p > 15) throw ContractError("shap_brute: feature count must be <= 15");
  if (background.n_rows() == 0) throw ContractError("shap_brute: background must be non-empty");

  const size_t n_masks = size_t{1} << p;
  std::vector<double> v(n_masks, 0.0);
  std::vector<double> hybrid(p);
  const double bg_weight = 1.0 / static_cast<double>(background.n_rows());
  for (size_t mask = 0; mask < n_masks; ++mask) {
    double total = 0.0;
    for (size_t r = 0; r < background.n_rows(); ++r) {
      for (size_t c = 0; c < p; ++c)
        hybrid[c] = (mask >> c) & 1 ? x[c] : background.cols[c][r];
      total += m.score(hybrid);
    }
    v[mask] = total * bg_weight;
  }

  std::vector<double> fact(p + 1, 1.0);
  for (size_t i = 1; i <= p; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  ShapValues out;
  out.phi.assign(p, 0.0);
  for (size_t i = 0; i < p; ++i) {
    const size_t bit = size_t{1} << i;
    double phi = 0.0;
    for (size_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const size_t s = static_cast<size_t>(__builtin_popcountll(mask));
      const double w = fact[s] * fact[p - s - 1] / fact[p];
      phi += w * (v[mask | bit] - v[mask]);
    }
    out.phi[i] = phi;
  }
  out.base = v[0];
  out.prediction = v[n_masks - 1];
  return out;
}

struct ShapMatrix {
  std::vector<std::string> feature_names;   // model feature order
  std::vector<size_t> order;                // features ranked by mean |phi|, descending
  std::vector<std::vector<double>> phi;     // per record
  std::vector<std::vector<double>> values;  // feature values per record (plot data)
  double base = 0.0;
  std::string output_space;  // "probability" or "log_odds"
};

inline ShapMatrix shap_summary(const TreeEnsemble& m, const FeatureMatrix& data,
                               const FeatureMatrix& background, unsigned workers = 1) {
  ShapMatrix out;
  for (const auto& info : data.info) out.feature_names.push_back(info.name);
  out.output_space = m.kind == EnsembleKind::boosted ? "log_odds" : "probability";
  out.phi.resize(data.n_rows());
  out.values.resize(data.n_rows());
  parallel_for(data.n_rows(), workers, [&](size_t r) {
    std::vector<double> x(data.n_cols());
    for (size_t c = 0; c < data.n_cols(); ++c) x[c] = data.cols[c][r];
    ShapValues sv = shap_tree(m, x, background);
    out.phi[r] = std::move(sv.phi);
    out.values[r] = std::move(x);
  });
  if (!data.n_rows()) return out;
  for (size_t r = 0; r < background.n_rows(); ++r) out.base += m.score(background.row(r));
  out.base /= static_cast<double>(background.n_rows());
  const size_t p = data.n_cols();
  std::vector<double> mean_abs(p, 0.0);
  for (const auto& row : out.phi)
    for (size_t c = 0; c < p; ++c) mean_abs[c] += std::fabs(row[c]);
  for (double& v : mean_abs) v /= static_cast<double>(data.n_rows());
  out.order.resize(p);
  for (size_t c = 0; c < p; ++c) out.order[c] = c;
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](size_t a, size_t b) { return mean_abs[a] > mean_abs[b]; });
  return out;
}

// Per-feature split-gain totals over the realized splits of the ensemble,
// weighted by node coverage. Reported alongside the ablation importances for
// comparison; neither is claimed to subsume the other.
inline std::vector<double> split_gain_totals(const TreeEnsemble& m) {
  std::vector<double> totals(static_cast<size_t>(m.n_features), 0.0);
  for (const auto& tree : m.trees) {
    if (tree.nodes.empty()) continue;
    const double root_n = static_cast<double>(tree.nodes[0].count);
    for (const auto& nd : tree.nodes)
      if (!nd.is_leaf())
        totals[static_cast<size_t>(nd.feature)] += nd.gain * static_cast<double>(nd.count) / root_n;
  }
  return totals;
}

// ---------------------------------------------------------------------------
// Noise-floor ablation importance

struct ImportanceVector {
  std::vector<std::string> features;   // schema predictors, declaration order
  std::vector<double> importance;      // L1-normalized, zeroed under the noise floor
  std::vector<double> raw_delta;       // accuracy(without f) - accuracy(full)
  double noise_delta = 0.0;
  double full_accuracy = 0.0;
  std::vector<std::string> zeroed;
  bool all_zeroed = false;  // uniform fallback vector, normalization undefined
};

// Retrains via `cv_accuracy(dataset variant)` which must hold genome, seed and
// partition fixed so only the feature set varies.
inline ImportanceVector ablation_importance(const std::function<double(const Dataset&)>& cv_accuracy,
                                            const Dataset& d, uint64_t seed, unsigned workers = 1) {
  ImportanceVector out;
  for (size_t i : d.schema().predictor_indices()) out.features.push_back(d.schema().at(i).name);
  const size_t p = out.features.size();
  out.raw_delta.assign(p, 0.0);
  out.importance.assign(p, 0.0);

  out.full_accuracy = cv_accuracy(d);
  parallel_for(p, workers, [&](size_t i) {
    out.raw_delta[i] = cv_accuracy(d.without_feature(out.features[i])) - out.full_accuracy;
  });
  const Dataset with_noise = d.with_noise_feature("ABLATION_NOISE", derive_seed(seed, 0xab1a));
  out.noise_delta = cv_accuracy(with_noise) - out.full_accuracy;

  double total = 0.0;
  for (size_t i = 0; i < p; ++i) {
    if (std::fabs(out.raw_delta[i]) <= std::fabs(out.noise_delta)) {
      out.zeroed.push_back(out.features[i]);
      continue;
    }
    total += std::fabs(out.raw_delta[i]);
  }
  if (total == 0.0) {
    out.all_zeroed = true;
    for (size_t i = 0; i < p; ++i) out.importance[i] = 1.0 / static_cast<double>(p);
    return out;
  }
  for (size_t i = 0; i < p; ++i) {
    if (std::fabs(out.raw_delta[i]) <= std::fabs(out.noise_delta)) continue;
    out.importance[i] = std::fabs(out.raw_delta[i]) / total;
  }
  return out;
}

// Mean k-fold accuracy of a fixed genome at the 0.5 threshold: the retraining
// primitive behind the ablation procedure.
inline double pipeline_partition_accuracy(const PipelineGenome& genome, const Dataset& d,
                                          const Partition& p, const std::string& target,
                                          uint64_t seed) {
  const size_t target_idx = d.schema().index_of(target);
  double total = 0.0;
  size_t folds = 0;
  for (int fold = 0; fold < p.k; ++fold) {
    const Dataset train = d.subset(p.complement_rows(fold));
    const auto y = train.labels(train.schema().index_of(target));
    bool single = true;
    for (size_t i = 1; i < y.size(); ++i) single &= y[i] == y[0];
    if (single) continue;
    const FittedPipeline fitted =
        fit_pipeline(genome, train, target, derive_seed(seed, static_cast<uint64_t>(fold)));
    const Dataset val = d.subset(p.cohort_rows(fold));
    const auto probs = fitted.predict_proba(val);
    size_t correct = 0;
    for (size_t r = 0; r < val.n_rows(); ++r) {
      const int pred = probs[r] >= 0.5 ? 1 : 0;
      correct += pred == (val.value(target_idx, r) != 0.0 ? 1 : 0) ? 1 : 0;
    }
    total += static_cast<double>(correct) / static_cast<double>(val.n_rows());
    ++folds;
  }
  if (folds == 0) throw DataError("ablation: every fold had single-class training data");
  return total / static_cast<double>(folds);
}

}  // namespace ponv
