// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ponv/common.hpp"
#include "ponv/csv.hpp"
#include "ponv/rng.hpp"

namespace ponv {

// Numeric matrix the models operate on (post-pipeline encoding). NaN marks a
// missing value. A column may be tagged categorical, in which case its values
// are integer category codes and trees split it by category subset.
struct MatrixColumnInfo {
  std::string name;
  bool discrete = false;  // mode rather than median under imputation
  int categories = 0;     // >0: categorical codes in [0, categories)
};

struct FeatureMatrix {
  std::vector<MatrixColumnInfo> info;
  std::vector<std::vector<double>> cols;

  size_t n_cols() const { return cols.size(); }
  size_t n_rows() const { return cols.empty() ? 0 : cols[0].size(); }

  std::vector<double> row(size_t r) const {
    std::vector<double> x(cols.size());
    for (size_t c = 0; c < cols.size(); ++c) x[c] = cols[c][r];
    return x;
  }
};

inline bool is_missing_value(double v) { return std::isnan(v); }

struct PredictDiagnostics {
  size_t missing_routed = 0;
  size_t unknown_category = 0;
};

struct TreeNode {
  int feature = -1;  // -1: leaf
  bool is_categorical = false;
  double threshold = 0.0;       // numeric: x < threshold goes left
  uint64_t category_mask = 0;   // categorical: set bit = category goes left
  uint64_t known_mask = 0;      // categories seen at fit time
  bool missing_left = true;     // majority direction for missing / unknown
  int left = -1, right = -1;
  double value = 0.0;  // classification: positive probability; boosting: additive score
  int count = 0;       // training rows at the node (bootstrap multiplicity included)
  double gain = 0.0;   // split quality recorded at fit time

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  size_t n_nodes() const { return nodes.size(); }

  size_t n_leaves() const {
    size_t n = 0;
    for (const auto& nd : nodes) n += nd.is_leaf() ? 1 : 0;
    return n;
  }

  int max_depth() const { return depth_of(0); }

  double predict(const std::vector<double>& x, PredictDiagnostics* diag = nullptr) const {
    return nodes[static_cast<size_t>(leaf_for(x, diag))].value;
  }

  int leaf_for(const std::vector<double>& x, PredictDiagnostics* diag = nullptr) const {
    int idx = 0;
    while (!nodes[static_cast<size_t>(idx)].is_leaf()) {
      const TreeNode& nd = nodes[static_cast<size_t>(idx)];
      idx = goes_left(nd, x[static_cast<size_t>(nd.feature)], diag) ? nd.left : nd.right;
    }
    return idx;
  }

  static bool goes_left(const TreeNode& nd, double v, PredictDiagnostics* diag = nullptr) {
    if (is_missing_value(v)) {
      if (diag) ++diag->missing_routed;
      return nd.missing_left;
    }
    if (!nd.is_categorical) return v < nd.threshold;
    const long c = static_cast<long>(v);
    if (c < 0 || c >= 64 || !((nd.known_mask >> c) & 1ull)) {
      if (diag) ++diag->unknown_category;
      return nd.missing_left;
    }
    return (nd.category_mask >> c) & 1ull;
  }

 private:
  int depth_of(int idx) const {
    const TreeNode& nd = nodes[static_cast<size_t>(idx)];
    if (nd.is_leaf()) return 0;
    return 1 + std::max(depth_of(nd.left), depth_of(nd.right));
  }
};

// ---------------------------------------------------------------------------
// Induction. One builder serves both jobs: classification trees accumulate
// (positives, rows) and score splits by entropy gain; the boosting trees
// accumulate (gradient, hessian) and score by the usual G^2/H reduction.

struct TreeParams {
  int max_depth = 8;
  int min_samples_leaf = 1;
  int feature_subsample = 0;  // distinct features per node; 0 = all
};

namespace detail {

inline double entropy(double pos, double n) {
  if (n <= 0.0 || pos <= 0.0 || pos >= n) return 0.0;
  const double p = pos / n;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

struct SplitChoice {
  bool found = false;
  double gain = -1.0;
  int feature = -1;
  bool is_categorical = false;
  double threshold = 0.0;
  uint64_t category_mask = 0;
  uint64_t known_mask = 0;

  bool better_than(const SplitChoice& o) const {
    if (!o.found) return found;
    if (gain != o.gain) return gain > o.gain;
    if (feature != o.feature) return feature < o.feature;
    return threshold < o.threshold;
  }
};

class TreeBuilder {
 public:
  enum class Task { classification, boosting };

  TreeBuilder(const FeatureMatrix& m, Task task, const TreeParams& params, Rng* rng)
      : m_(m), task_(task), params_(params), rng_(rng) {}

  // classification: a = label(0/1), b = 1; boosting: a = gradient, b = hessian
  DecisionTree build(const std::vector<size_t>& rows, const std::vector<double>& a,
                     const std::vector<double>& b) {
    a_ = &a;
    b_ = &b;
    DecisionTree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  static constexpr double kLambda = 1e-6;
  static constexpr double kLeafClamp = 4.0;

  double leaf_value(double sa, double sb, size_t cnt) const {
    if (task_ == Task::classification) return cnt ? sa / static_cast<double>(cnt) : 0.0;
    return std::clamp(sa / (sb + kLambda), -kLeafClamp, kLeafClamp);
  }

  // split quality on present rows; classification gain is additionally scaled
  // by the present fraction so features with heavy missingness do not win by
  // discarding rows (C4.5-style penalty)
  double split_gain(double pa, double pb, size_t pn, double la, double lb, size_t ln, double ra,
                    double rb, size_t rn, size_t node_n) const {
    if (task_ == Task::classification) {
      const double hp = entropy(pa, static_cast<double>(pn));
      const double hl = entropy(la, static_cast<double>(ln));
      const double hr = entropy(ra, static_cast<double>(rn));
      const double keep = static_cast<double>(pn) / static_cast<double>(node_n);
      const double gain = hp - (static_cast<double>(ln) * hl + static_cast<double>(rn) * hr) /
                                   static_cast<double>(pn);
      return keep * gain;
    }
    const double parent = pa * pa / (pb + kLambda);
    return la * la / (lb + kLambda) + ra * ra / (rb + kLambda) - parent;
  }

  bool gain_acceptable(double gain) const {
    // classification accepts zero-gain splits on impure nodes (a tie-broken
    // zero-gain split is what makes parity concepts learnable at depth 2);
    // boosting requires a real improvement
    return task_ == Task::classification ? gain >= 0.0 : gain > 1e-12;
  }

  int grow(DecisionTree& tree, const std::vector<size_t>& rows, int depth) {
    const auto& a = *a_;
    const auto& b = *b_;
    double sa = 0, sb = 0;
    for (size_t r : rows) {
      sa += a[r];
      sb += b[r];
    }
    const int node_idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    {
      TreeNode& nd = tree.nodes.back();
      nd.value = leaf_value(sa, sb, rows.size());
      nd.count = static_cast<int>(rows.size());
    }

    const bool pure = task_ == Task::classification &&
                      (sa <= 0.0 || sa >= static_cast<double>(rows.size()));
    if (depth >= params_.max_depth || rows.size() < 2 * static_cast<size_t>(params_.min_samples_leaf) ||
        rows.size() < 2 || pure)
      return node_idx;

    const SplitChoice choice = best_split(rows, sa, sb);
    if (!choice.found) return node_idx;

    std::vector<size_t> left_rows, right_rows;
    size_t left_present = 0, right_present = 0;
    TreeNode probe;
    probe.feature = choice.feature;
    probe.is_categorical = choice.is_categorical;
    probe.threshold = choice.threshold;
    probe.category_mask = choice.category_mask;
    probe.known_mask = choice.known_mask;
    for (size_t r : rows) {
      const double v = m_.cols[static_cast<size_t>(choice.feature)][r];
      if (is_missing_value(v)) continue;
      if (DecisionTree::goes_left(probe, v))
        ++left_present;
      else
        ++right_present;
    }
    const bool missing_left = left_present >= right_present;
    for (size_t r : rows) {
      const double v = m_.cols[static_cast<size_t>(choice.feature)][r];
      const bool left = is_missing_value(v) ? missing_left : DecisionTree::goes_left(probe, v);
      (left ? left_rows : right_rows).push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) return node_idx;  // cannot happen for valid splits

    const int l = grow(tree, left_rows, depth + 1);
    const int r = grow(tree, right_rows, depth + 1);
    TreeNode& nd = tree.nodes[static_cast<size_t>(node_idx)];
    nd.feature = choice.feature;
    nd.is_categorical = choice.is_categorical;
    nd.threshold = choice.threshold;
    nd.category_mask = choice.category_mask;
    nd.known_mask = choice.known_mask;
    nd.missing_left = missing_left;
    nd.left = l;
    nd.right = r;
    nd.gain = choice.gain;
    return node_idx;
  }

  SplitChoice best_split(const std::vector<size_t>& rows, double, double) {
    std::vector<size_t> features;
    const size_t p = m_.n_cols();
    if (params_.feature_subsample > 0 && static_cast<size_t>(params_.feature_subsample) < p && rng_) {
      features = rng_->sample_without_replacement(p, static_cast<size_t>(params_.feature_subsample));
      std::sort(features.begin(), features.end());
    } else {
      features.resize(p);
      for (size_t i = 0; i < p; ++i) features[i] = i;
    }

    SplitChoice best;
    for (size_t f : features) {
      const SplitChoice c = m_.info[f].categories > 0 ? scan_categorical(rows, f)
                                                      : scan_numeric(rows, f);
      if (c.found && c.better_than(best)) best = c;
    }
    return best;
  }

  SplitChoice scan_numeric(const std::vector<size_t>& rows, size_t f) {
    const auto& col = m_.cols[f];
    const auto& a = *a_;
    const auto& b = *b_;
    struct Item {
      double v, a, b;
    };
    std::vector<Item> items;
    items.reserve(rows.size());
    double pa = 0, pb = 0;
    for (size_t r : rows) {
      const double v = col[r];
      if (is_missing_value(v)) continue;
      items.push_back({v, a[r], b[r]});
      pa += a[r];
      pb += b[r];
    }
    const size_t pn = items.size();
    SplitChoice best;
    if (pn < 2) return best;
    std::stable_sort(items.begin(), items.end(), [](const Item& x, const Item& y) { return x.v < y.v; });

    double la = 0, lb = 0;
    const size_t min_leaf = static_cast<size_t>(params_.min_samples_leaf);
    for (size_t i = 0; i + 1 < pn; ++i) {
      la += items[i].a;
      lb += items[i].b;
      if (items[i].v == items[i + 1].v) continue;
      const size_t ln = i + 1, rn = pn - ln;
      if (ln < min_leaf || rn < min_leaf) continue;
      const double gain = split_gain(pa, pb, pn, la, lb, ln, pa - la, pb - lb, rn, rows.size());
      if (!gain_acceptable(gain)) continue;
      SplitChoice c;
      c.found = true;
      c.gain = gain;
      c.feature = static_cast<int>(f);
      c.threshold = items[i].v + 0.5 * (items[i + 1].v - items[i].v);
      if (c.better_than(best)) best = c;
    }
    return best;
  }

  SplitChoice scan_categorical(const std::vector<size_t>& rows, size_t f) {
    const int arity = m_.info[f].categories;
    const auto& col = m_.cols[f];
    const auto& a = *a_;
    const auto& b = *b_;
    SplitChoice best;
    if (arity < 2 || arity > 64) return best;
    std::vector<double> ca(static_cast<size_t>(arity), 0.0), cb(static_cast<size_t>(arity), 0.0);
    std::vector<size_t> cn(static_cast<size_t>(arity), 0);
    double pa = 0, pb = 0;
    size_t pn = 0;
    for (size_t r : rows) {
      const double v = col[r];
      if (is_missing_value(v)) continue;
      const auto c = static_cast<size_t>(v);
      ca[c] += a[r];
      cb[c] += b[r];
      ++cn[c];
      pa += a[r];
      pb += b[r];
      ++pn;
    }
    std::vector<size_t> present;
    uint64_t known = 0;
    for (size_t c = 0; c < static_cast<size_t>(arity); ++c)
      if (cn[c]) {
        present.push_back(c);
        known |= 1ull << c;
      }
    if (present.size() < 2) return best;
    // order by response rate, then prefix subsets (the classic ordered trick)
    std::stable_sort(present.begin(), present.end(), [&](size_t x, size_t y) {
      const double rx = task_ == Task::classification ? ca[x] / static_cast<double>(cn[x])
                                                      : ca[x] / (cb[x] + kLambda);
      const double ry = task_ == Task::classification ? ca[y] / static_cast<double>(cn[y])
                                                      : ca[y] / (cb[y] + kLambda);
      return rx < ry;
    });
    const size_t min_leaf = static_cast<size_t>(params_.min_samples_leaf);
    double la = 0, lb = 0;
    size_t ln = 0;
    uint64_t mask = 0;
    for (size_t j = 0; j + 1 < present.size(); ++j) {
      const size_t c = present[j];
      la += ca[c];
      lb += cb[c];
      ln += cn[c];
      mask |= 1ull << c;
      const size_t rn = pn - ln;
      if (ln < min_leaf || rn < min_leaf) continue;
      const double gain = split_gain(pa, pb, pn, la, lb, ln, pa - la, pb - lb, rn, rows.size());
      if (!gain_acceptable(gain)) continue;
      SplitChoice cand;
      cand.found = true;
      cand.gain = gain;
      cand.feature = static_cast<int>(f);
      cand.is_categorical = true;
      cand.category_mask = mask;
      cand.known_mask = known;
      cand.threshold = static_cast<double>(j + 1);  // prefix length, tie-break only
      if (cand.better_than(best)) best = cand;
    }
    if (best.found) best.threshold = 0.0;
    return best;
  }

  const FeatureMatrix& m_;
  Task task_;
  TreeParams params_;
  Rng* rng_;
  const std::vector<double>* a_ = nullptr;
  const std::vector<double>* b_ = nullptr;
};

}  // namespace detail

inline DecisionTree fit_classification_tree(const FeatureMatrix& m, const std::vector<int>& y,
                                            const std::vector<size_t>& rows, const TreeParams& params,
                                            Rng* rng = nullptr) {
  std::vector<double> a(m.n_rows()), b(m.n_rows(), 1.0);
  for (size_t r = 0; r < m.n_rows(); ++r) a[r] = y[r];
  detail::TreeBuilder builder(m, detail::TreeBuilder::Task::classification, params, rng);
  return builder.build(rows, a, b);
}

// ---------------------------------------------------------------------------
// Ensembles

enum class ModelFamily { tree, forest, boosted };

inline const char* family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::tree: return "tree";
    case ModelFamily::forest: return "forest";
    case ModelFamily::boosted: return "boosted";
  }
  return "?";
}

// Model genes: the family plus its hyperparameter tuple.
struct ModelSpec {
  ModelFamily family = ModelFamily::forest;
  int max_depth = 8;
  int min_samples_leaf = 1;
  int n_trees = 100;          // forest trees or boosting rounds
  double learning_rate = 0.1; // boosted only
  bool prune = false;         // single tree only: cost-complexity post-pruning
};

enum class EnsembleKind { single, forest, boosted, constant };

inline const char* ensemble_kind_name(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::single: return "single";
    case EnsembleKind::forest: return "forest";
    case EnsembleKind::boosted: return "boosted";
    case EnsembleKind::constant: return "constant";
  }
  return "?";
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct TreeEnsemble {
  EnsembleKind kind = EnsembleKind::single;
  int n_features = 0;
  std::vector<DecisionTree> trees;
  std::vector<double> tree_weights;  // boosted: per-round scale
  double base_score = 0.0;           // boosted: initial log-odds
  double constant_value = 0.5;       // single-class training guard
  bool degenerate = false;           // set when training saw a single class

  // Raw additive score: probability for single/forest/constant, log-odds for boosted.
  double score(const std::vector<double>& x, PredictDiagnostics* diag = nullptr) const {
    switch (kind) {
      case EnsembleKind::constant:
        return constant_value;
      case EnsembleKind::single:
        return trees[0].predict(x, diag);
      case EnsembleKind::forest: {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict(x, diag);
        return s / static_cast<double>(trees.size());
      }
      case EnsembleKind::boosted: {
        double s = base_score;
        for (size_t t = 0; t < trees.size(); ++t) s += tree_weights[t] * trees[t].predict(x, diag);
        return s;
      }
    }
    return 0.0;
  }

  double predict_proba(const std::vector<double>& x, PredictDiagnostics* diag = nullptr) const {
    const double s = score(x, diag);
    return kind == EnsembleKind::boosted ? sigmoid(s) : s;
  }

  std::vector<double> predict_proba_matrix(const FeatureMatrix& m,
                                           PredictDiagnostics* diag = nullptr) const {
    std::vector<double> out(m.n_rows());
    std::vector<double> x(m.n_cols());
    for (size_t r = 0; r < m.n_rows(); ++r) {
      for (size_t c = 0; c < m.n_cols(); ++c) x[c] = m.cols[c][r];
      out[r] = predict_proba(x, diag);
    }
    return out;
  }
};

struct BoostFitInfo {
  std::vector<double> train_loss;  // loss_[0] = base model, then one entry per kept round
  int rounds_kept = 0;
};

namespace detail {

inline double stable_logloss(const std::vector<double>& f, const std::vector<int>& y) {
  double total = 0.0;
  for (size_t i = 0; i < f.size(); ++i) {
    const double z = y[i] == 1 ? -f[i] : f[i];
    total += z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  }
  return total / static_cast<double>(f.size());
}

}  // namespace detail

inline TreeEnsemble fit_model(const FeatureMatrix& m, const std::vector<int>& y, const ModelSpec& spec,
                              uint64_t seed, unsigned workers = 1, BoostFitInfo* boost_info = nullptr) {
  if (m.n_rows() == 0 || m.n_rows() != y.size()) throw ContractError("fit_model: bad inputs");
  TreeEnsemble ens;
  ens.n_features = static_cast<int>(m.n_cols());

  size_t pos = 0;
  for (int v : y) pos += v ? 1 : 0;
  if (pos == 0 || pos == y.size()) {
    ens.kind = EnsembleKind::constant;
    ens.degenerate = true;
    ens.constant_value = static_cast<double>(pos) / static_cast<double>(y.size());
    return ens;
  }

  std::vector<size_t> all_rows(m.n_rows());
  for (size_t r = 0; r < m.n_rows(); ++r) all_rows[r] = r;

  TreeParams tp;
  tp.max_depth = spec.max_depth;
  tp.min_samples_leaf = spec.min_samples_leaf;

  switch (spec.family) {
    case ModelFamily::tree: {
      ens.kind = EnsembleKind::single;
      ens.trees.push_back(fit_classification_tree(m, y, all_rows, tp));
      break;
    }
    case ModelFamily::forest: {
      ens.kind = EnsembleKind::forest;
      tp.feature_subsample =
          std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(m.n_cols())))));
      ens.trees.resize(static_cast<size_t>(spec.n_trees));
      parallel_for(static_cast<size_t>(spec.n_trees), workers, [&](size_t t) {
        Rng rng(derive_seed(seed, t));
        std::vector<size_t> rows(m.n_rows());
        for (size_t i = 0; i < m.n_rows(); ++i) rows[i] = static_cast<size_t>(rng.below(m.n_rows()));
        ens.trees[t] = fit_classification_tree(m, y, rows, tp, &rng);
      });
      break;
    }
    case ModelFamily::boosted: {
      ens.kind = EnsembleKind::boosted;
      const double rate = static_cast<double>(pos) / static_cast<double>(y.size());
      ens.base_score = std::log(rate / (1.0 - rate));
      std::vector<double> f(m.n_rows(), ens.base_score);
      std::vector<double> g(m.n_rows()), h(m.n_rows());
      double loss = detail::stable_logloss(f, y);
      if (boost_info) boost_info->train_loss.push_back(loss);
      detail::TreeBuilder builder(m, detail::TreeBuilder::Task::boosting, tp, nullptr);
      for (int round = 0; round < spec.n_trees; ++round) {
        for (size_t i = 0; i < m.n_rows(); ++i) {
          const double p = sigmoid(f[i]);
          g[i] = static_cast<double>(y[i]) - p;
          h[i] = std::max(p * (1.0 - p), 1e-12);
        }
        DecisionTree tree = builder.build(all_rows, g, h);
        if (tree.nodes.size() <= 1 && std::fabs(tree.nodes[0].value) < 1e-15) break;
        std::vector<double> delta(m.n_rows());
        std::vector<double> x(m.n_cols());
        for (size_t r = 0; r < m.n_rows(); ++r) {
          for (size_t c = 0; c < m.n_cols(); ++c) x[c] = m.cols[c][r];
          delta[r] = tree.predict(x);
        }
        // Newton step damped by the learning rate; halve further if the
        // training loss would not improve, so the loss trace never rises
        double w = spec.learning_rate;
        bool accepted = false;
        std::vector<double> trial(m.n_rows());
        for (int shrink = 0; shrink < 30; ++shrink) {
          for (size_t r = 0; r < m.n_rows(); ++r) trial[r] = f[r] + w * delta[r];
          const double new_loss = detail::stable_logloss(trial, y);
          if (new_loss <= loss + 1e-12) {
            loss = new_loss;
            f.swap(trial);
            accepted = true;
            break;
          }
          w *= 0.5;
        }
        if (!accepted) break;
        ens.trees.push_back(std::move(tree));
        ens.tree_weights.push_back(w);
        if (boost_info) boost_info->train_loss.push_back(loss);
      }
      if (boost_info) boost_info->rounds_kept = static_cast<int>(ens.trees.size());
      if (ens.trees.empty()) {
        // no useful round; keep the base-rate model
        ens.kind = EnsembleKind::constant;
        ens.constant_value = rate;
      }
      break;
    }
  }
  return ens;
}

// ---------------------------------------------------------------------------
// Cost-complexity post-pruning

struct PruneResult {
  DecisionTree tree;
  bool holdout_empty = false;
  double holdout_accuracy = 0.0;
  double chosen_alpha = 0.0;
  size_t candidates = 0;
};

namespace detail {

// subtree training misclassification (counts are stored on the nodes)
inline double subtree_error(const DecisionTree& t, int idx, const std::vector<uint8_t>& collapsed) {
  const TreeNode& nd = t.nodes[static_cast<size_t>(idx)];
  if (nd.is_leaf() || collapsed[static_cast<size_t>(idx)])
    return static_cast<double>(nd.count) * std::min(nd.value, 1.0 - nd.value);
  return subtree_error(t, nd.left, collapsed) + subtree_error(t, nd.right, collapsed);
}

inline size_t subtree_leaves(const DecisionTree& t, int idx, const std::vector<uint8_t>& collapsed) {
  const TreeNode& nd = t.nodes[static_cast<size_t>(idx)];
  if (nd.is_leaf() || collapsed[static_cast<size_t>(idx)]) return 1;
  return subtree_leaves(t, nd.left, collapsed) + subtree_leaves(t, nd.right, collapsed);
}

inline void materialize(const DecisionTree& src, int idx, const std::vector<uint8_t>& collapsed,
                        DecisionTree& dst) {
  const TreeNode& nd = src.nodes[static_cast<size_t>(idx)];
  const int out_idx = static_cast<int>(dst.nodes.size());
  dst.nodes.push_back(nd);
  if (nd.is_leaf() || collapsed[static_cast<size_t>(idx)]) {
    TreeNode& leaf = dst.nodes[static_cast<size_t>(out_idx)];
    leaf.feature = -1;
    leaf.is_categorical = false;
    leaf.left = leaf.right = -1;
    leaf.threshold = 0.0;
    leaf.category_mask = leaf.known_mask = 0;
    return;
  }
  dst.nodes[static_cast<size_t>(out_idx)].left = static_cast<int>(dst.nodes.size());
  materialize(src, nd.left, collapsed, dst);
  dst.nodes[static_cast<size_t>(out_idx)].right = static_cast<int>(dst.nodes.size());
  materialize(src, nd.right, collapsed, dst);
}

}  // namespace detail

// Weakest-link pruning path, then the subtree with the best holdout accuracy
// (0.5 decision threshold). Ties go to the smaller tree. When `alphas` is
// non-empty, only the path subtrees selected by those alphas compete.
inline PruneResult prune(const DecisionTree& t, const FeatureMatrix& holdout,
                         const std::vector<int>& y_holdout, const std::vector<double>& alphas = {}) {
  PruneResult result;
  if (holdout.n_rows() == 0 || y_holdout.empty()) {
    result.tree = t;
    result.holdout_empty = true;
    return result;
  }
  if (holdout.n_rows() != y_holdout.size()) throw ContractError("prune: holdout size mismatch");

  // path of (alpha, collapsed set), starting with the unpruned tree
  std::vector<std::pair<double, std::vector<uint8_t>>> path;
  std::vector<uint8_t> collapsed(t.nodes.size(), 0);
  path.push_back({0.0, collapsed});
  while (detail::subtree_leaves(t, 0, collapsed) > 1) {
    double best_g = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < t.nodes.size(); ++i) {
      if (t.nodes[i].is_leaf() || collapsed[i]) continue;
      const double r_leaf =
          static_cast<double>(t.nodes[i].count) * std::min(t.nodes[i].value, 1.0 - t.nodes[i].value);
      const double r_sub = detail::subtree_error(t, static_cast<int>(i), collapsed);
      const size_t leaves = detail::subtree_leaves(t, static_cast<int>(i), collapsed);
      if (leaves < 2) continue;
      const double g = (r_leaf - r_sub) / static_cast<double>(leaves - 1);
      best_g = std::min(best_g, g);
    }
    if (!std::isfinite(best_g)) break;
    // collapse every node achieving the weakest link
    for (size_t i = 0; i < t.nodes.size(); ++i) {
      if (t.nodes[i].is_leaf() || collapsed[i]) continue;
      const double r_leaf =
          static_cast<double>(t.nodes[i].count) * std::min(t.nodes[i].value, 1.0 - t.nodes[i].value);
      const double r_sub = detail::subtree_error(t, static_cast<int>(i), collapsed);
      const size_t leaves = detail::subtree_leaves(t, static_cast<int>(i), collapsed);
      if (leaves < 2) continue;
      const double g = (r_leaf - r_sub) / static_cast<double>(leaves - 1);
      if (g <= best_g + 1e-12) collapsed[i] = 1;
    }
    path.push_back({std::max(best_g, 0.0), collapsed});
  }

  // candidate set: full path, or the path positions selected by the alpha grid
  std::vector<size_t> candidate_idx;
  if (alphas.empty()) {
    for (size_t i = 0; i < path.size(); ++i) candidate_idx.push_back(i);
  } else {
    for (double alpha : alphas) {
      size_t pick = 0;
      for (size_t i = 0; i < path.size(); ++i)
        if (path[i].first <= alpha) pick = i;
      candidate_idx.push_back(pick);
    }
    std::sort(candidate_idx.begin(), candidate_idx.end());
    candidate_idx.erase(std::unique(candidate_idx.begin(), candidate_idx.end()), candidate_idx.end());
  }
  result.candidates = candidate_idx.size();

  double best_acc = -1.0;
  size_t best_nodes = SIZE_MAX;
  DecisionTree best_tree;
  double best_alpha = 0.0;
  std::vector<double> x(holdout.n_cols());
  for (size_t ci : candidate_idx) {
    DecisionTree cand;
    detail::materialize(t, 0, path[ci].second, cand);
    size_t correct = 0;
    for (size_t r = 0; r < holdout.n_rows(); ++r) {
      for (size_t c = 0; c < holdout.n_cols(); ++c) x[c] = holdout.cols[c][r];
      const int pred = cand.predict(x) >= 0.5 ? 1 : 0;
      correct += pred == y_holdout[r] ? 1 : 0;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(holdout.n_rows());
    if (acc > best_acc || (acc == best_acc && cand.n_nodes() < best_nodes)) {
      best_acc = acc;
      best_nodes = cand.n_nodes();
      best_tree = std::move(cand);
      best_alpha = path[ci].first;
    }
  }
  result.tree = std::move(best_tree);
  result.holdout_accuracy = best_acc;
  result.chosen_alpha = best_alpha;
  return result;
}

// ---------------------------------------------------------------------------
// Versioned human-diffable serialization; numbers round-trip bit-exactly.

inline std::string serialize_tree(const DecisionTree& t) {
  std::ostringstream out;
  out << "nodes " << t.nodes.size() << "\n";
  for (size_t i = 0; i < t.nodes.size(); ++i) {
    const TreeNode& nd = t.nodes[i];
    if (nd.is_leaf()) {
      out << "node " << i << " leaf value " << format_double(nd.value) << " count " << nd.count << "\n";
    } else if (nd.is_categorical) {
      out << "node " << i << " catsplit " << nd.feature << " mask " << nd.category_mask << " known "
          << nd.known_mask << " missing " << (nd.missing_left ? "L" : "R") << " left " << nd.left
          << " right " << nd.right << " value " << format_double(nd.value) << " count " << nd.count
          << " gain " << format_double(nd.gain) << "\n";
    } else {
      out << "node " << i << " split " << nd.feature << " thr " << format_double(nd.threshold)
          << " missing " << (nd.missing_left ? "L" : "R") << " left " << nd.left << " right "
          << nd.right << " value " << format_double(nd.value) << " count " << nd.count << " gain "
          << format_double(nd.gain) << "\n";
    }
  }
  return out.str();
}

inline std::string serialize_model(const TreeEnsemble& m) {
  std::ostringstream out;
  out << "ponvkit-model " << kArtifactVersion << "\n";
  out << "kind " << ensemble_kind_name(m.kind) << "\n";
  out << "n_features " << m.n_features << "\n";
  out << "degenerate " << (m.degenerate ? 1 : 0) << "\n";
  if (m.kind == EnsembleKind::constant) out << "constant_value " << format_double(m.constant_value) << "\n";
  if (m.kind == EnsembleKind::boosted) out << "base_score " << format_double(m.base_score) << "\n";
  out << "trees " << m.trees.size() << "\n";
  for (size_t t = 0; t < m.trees.size(); ++t) {
    out << "tree " << t;
    if (m.kind == EnsembleKind::boosted) out << " weight " << format_double(m.tree_weights[t]);
    out << "\n" << serialize_tree(m.trees[t]);
  }
  out << "end\n";
  return out.str();
}

namespace detail {

inline std::vector<std::string> tokens_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline double must_double(const std::string& s) {
  bool ok = false;
  const double v = parse_double(s, ok);
  if (!ok) throw DataError("model parse: bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline TreeEnsemble parse_model(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  TreeEnsemble m;
  size_t expect_trees = 0;
  DecisionTree* cur = nullptr;
  size_t expect_nodes = 0;
  bool got_header = false;
  while (std::getline(in, line)) {
    const auto tok = detail::tokens_of(line);
    if (tok.empty()) continue;
    if (tok[0] == "ponvkit-model") {
      if (tok.size() != 2 || tok[1] != std::to_string(kArtifactVersion))
        throw DataError("model parse: unsupported version");
      got_header = true;
    } else if (tok[0] == "kind") {
      if (tok[1] == "single") m.kind = EnsembleKind::single;
      else if (tok[1] == "forest") m.kind = EnsembleKind::forest;
      else if (tok[1] == "boosted") m.kind = EnsembleKind::boosted;
      else if (tok[1] == "constant") m.kind = EnsembleKind::constant;
      else throw DataError("model parse: unknown kind " + tok[1]);
    } else if (tok[0] == "n_features") {
      m.n_features = std::stoi(tok[1]);
    } else if (tok[0] == "degenerate") {
      m.degenerate = tok[1] == "1";
    } else if (tok[0] == "constant_value") {
      m.constant_value = detail::must_double(tok[1]);
    } else if (tok[0] == "base_score") {
      m.base_score = detail::must_double(tok[1]);
    } else if (tok[0] == "trees") {
      expect_trees = static_cast<size_t>(std::stoul(tok[1]));
      m.trees.reserve(expect_trees);
    } else if (tok[0] == "tree") {
      m.trees.emplace_back();
      cur = &m.trees.back();
      if (m.kind == EnsembleKind::boosted) {
        if (tok.size() < 4 || tok[2] != "weight") throw DataError("model parse: boosted tree needs weight");
        m.tree_weights.push_back(detail::must_double(tok[3]));
      }
    } else if (tok[0] == "nodes") {
      if (!cur) throw DataError("model parse: nodes outside tree");
      expect_nodes = static_cast<size_t>(std::stoul(tok[1]));
      cur->nodes.reserve(expect_nodes);
    } else if (tok[0] == "node") {
      if (!cur) throw DataError("model parse: node outside tree");
      TreeNode nd;
      size_t i = 2;
      if (tok[i] == "leaf") {
        nd.feature = -1;
        nd.value = detail::must_double(tok[i + 2]);
        nd.count = std::stoi(tok[i + 4]);
      } else if (tok[i] == "split" || tok[i] == "catsplit") {
        nd.is_categorical = tok[i] == "catsplit";
        nd.feature = std::stoi(tok[i + 1]);
        i += 2;
        if (nd.is_categorical) {
          nd.category_mask = std::stoull(tok[i + 1]);
          nd.known_mask = std::stoull(tok[i + 3]);
          i += 4;
        } else {
          nd.threshold = detail::must_double(tok[i + 1]);
          i += 2;
        }
        if (tok[i] != "missing") throw DataError("model parse: malformed node line");
        nd.missing_left = tok[i + 1] == "L";
        nd.left = std::stoi(tok[i + 3]);
        nd.right = std::stoi(tok[i + 5]);
        nd.value = detail::must_double(tok[i + 7]);
        nd.count = std::stoi(tok[i + 9]);
        nd.gain = detail::must_double(tok[i + 11]);
      } else {
        throw DataError("model parse: malformed node line");
      }
      cur->nodes.push_back(nd);
    } else if (tok[0] == "end") {
      break;
    } else {
      throw DataError("model parse: unexpected line '" + line + "'");
    }
  }
  if (!got_header) throw DataError("model parse: missing header");
  if (m.trees.size() != expect_trees) throw DataError("model parse: tree count mismatch");
  return m;
}

}  // namespace ponv
