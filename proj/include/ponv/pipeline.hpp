// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ponv/dataset.hpp"
#include "ponv/model.hpp"

namespace ponv {

// ---------------------------------------------------------------------------
// Modeling encoder: binary and ordinal features pass through as one numeric
// column, unordered categoricals expand one-of-category. Missing cells become
// NaN for the imputer downstream.

struct EncoderColumn {
  std::string feature;      // schema feature name
  int onehot_category = -1; // -1: verbatim column, else category index
  bool discrete = false;

  std::string display_name(const FeatureSchema& schema) const {
    if (onehot_category < 0) return feature;
    const auto& f = schema.at(schema.index_of(feature));
    return feature + "=" + f.categories[static_cast<size_t>(onehot_category)];
  }
};

struct ModelEncoder {
  std::vector<EncoderColumn> columns;

  static ModelEncoder build(const FeatureSchema& schema) {
    ModelEncoder enc;
    for (size_t i : schema.predictor_indices()) {
      const FeatureSpec& f = schema.at(i);
      if (f.kind == FeatureKind::categorical) {
        for (size_t c = 0; c < f.categories.size(); ++c)
          enc.columns.push_back({f.name, static_cast<int>(c), true});
      } else {
        enc.columns.push_back({f.name, -1, f.kind != FeatureKind::continuous});
      }
    }
    return enc;
  }

  FeatureMatrix transform(const Dataset& d) const {
    FeatureMatrix m;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& col : columns) {
      MatrixColumnInfo info;
      info.name = col.display_name(d.schema());
      info.discrete = col.discrete;
      m.info.push_back(info);
      const size_t src = d.schema().index_of(col.feature);
      std::vector<double> v(d.n_rows());
      for (size_t r = 0; r < d.n_rows(); ++r) {
        if (d.is_missing(src, r))
          v[r] = nan;
        else if (col.onehot_category >= 0)
          v[r] = d.value(src, r) == static_cast<double>(col.onehot_category) ? 1.0 : 0.0;
        else
          v[r] = d.value(src, r);
      }
      m.cols.push_back(std::move(v));
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Pipeline operators

enum class ImputerKind { median_mode, constant_zero, indicator };
enum class ScalerKind { none, standardize, minmax };

inline const char* imputer_name(ImputerKind k) {
  switch (k) {
    case ImputerKind::median_mode: return "median_mode";
    case ImputerKind::constant_zero: return "constant_zero";
    case ImputerKind::indicator: return "indicator";
  }
  return "?";
}

inline const char* scaler_name(ScalerKind k) {
  switch (k) {
    case ScalerKind::none: return "none";
    case ScalerKind::standardize: return "standardize";
    case ScalerKind::minmax: return "minmax";
  }
  return "?";
}

struct FittedImputer {
  ImputerKind kind = ImputerKind::median_mode;
  std::vector<double> fill;            // per column
  std::vector<size_t> indicator_cols;  // columns that had missing values in train

  static FittedImputer fit(ImputerKind kind, const FeatureMatrix& train) {
    FittedImputer imp;
    imp.kind = kind;
    imp.fill.assign(train.n_cols(), 0.0);
    for (size_t c = 0; c < train.n_cols(); ++c) {
      bool any_missing = false;
      std::vector<double> present;
      for (double v : train.cols[c]) {
        if (is_missing_value(v))
          any_missing = true;
        else
          present.push_back(v);
      }
      if (any_missing) imp.indicator_cols.push_back(c);
      if (kind == ImputerKind::constant_zero || present.empty()) {
        imp.fill[c] = 0.0;
        continue;
      }
      std::sort(present.begin(), present.end());
      if (train.info[c].discrete) {
        // mode; ties toward the smaller value
        double best = present[0];
        size_t best_n = 0, i = 0;
        while (i < present.size()) {
          size_t j = i;
          while (j + 1 < present.size() && present[j + 1] == present[i]) ++j;
          if (j - i + 1 > best_n) {
            best_n = j - i + 1;
            best = present[i];
          }
          i = j + 1;
        }
        imp.fill[c] = best;
      } else {
        const size_t n = present.size();
        imp.fill[c] = n % 2 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
      }
    }
    if (kind != ImputerKind::indicator) imp.indicator_cols.clear();
    return imp;
  }

  // Indicator flags must be derived before filling.
  void apply(FeatureMatrix& m) const {
    std::vector<std::vector<double>> flags;
    for (size_t c : indicator_cols) {
      std::vector<double> f(m.n_rows());
      for (size_t r = 0; r < m.n_rows(); ++r) f[r] = is_missing_value(m.cols[c][r]) ? 1.0 : 0.0;
      flags.push_back(std::move(f));
    }
    for (size_t c = 0; c < m.n_cols(); ++c)
      for (double& v : m.cols[c])
        if (is_missing_value(v)) v = fill[c];
    for (size_t i = 0; i < flags.size(); ++i) {
      MatrixColumnInfo info;
      info.name = m.info[indicator_cols[i]].name + "__missing";
      info.discrete = true;
      m.info.push_back(info);
      m.cols.push_back(std::move(flags[i]));
    }
  }
};

struct FittedScaler {
  ScalerKind kind = ScalerKind::none;
  std::vector<double> shift, scale;  // x' = (x - shift) * scale

  static FittedScaler fit(ScalerKind kind, const FeatureMatrix& train) {
    FittedScaler s;
    s.kind = kind;
    s.shift.assign(train.n_cols(), 0.0);
    s.scale.assign(train.n_cols(), 1.0);
    if (kind == ScalerKind::none) return s;
    for (size_t c = 0; c < train.n_cols(); ++c) {
      const auto& col = train.cols[c];
      if (col.empty()) continue;
      if (kind == ScalerKind::standardize) {
        double mean = 0;
        for (double v : col) mean += v;
        mean /= static_cast<double>(col.size());
        double var = 0;
        for (double v : col) var += (v - mean) * (v - mean);
        var /= static_cast<double>(col.size());
        s.shift[c] = mean;
        s.scale[c] = var > 0 ? 1.0 / std::sqrt(var) : 0.0;
      } else {
        double mn = col[0], mx = col[0];
        for (double v : col) {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
        s.shift[c] = mn;
        s.scale[c] = mx > mn ? 1.0 / (mx - mn) : 0.0;
      }
    }
    return s;
  }

  void apply(FeatureMatrix& m) const {
    if (kind == ScalerKind::none) return;
    for (size_t c = 0; c < m.n_cols() && c < shift.size(); ++c)
      for (double& v : m.cols[c]) v = (v - shift[c]) * scale[c];
  }
};

// Entropy gain of the best single split on one column; used by the top-m
// selector. Missing-heavy columns are penalized by the present fraction,
// matching the tree induction.
inline double column_information_gain(const FeatureMatrix& m, size_t col, const std::vector<int>& y) {
  FeatureMatrix single;
  single.info.push_back(m.info[col]);
  single.cols.push_back(m.cols[col]);
  std::vector<size_t> rows(m.n_rows());
  for (size_t r = 0; r < m.n_rows(); ++r) rows[r] = r;
  TreeParams params;
  params.max_depth = 1;
  params.min_samples_leaf = 1;
  const DecisionTree stump = fit_classification_tree(single, y, rows, params);
  return stump.nodes.empty() || stump.nodes[0].is_leaf() ? 0.0 : stump.nodes[0].gain;
}

struct FittedSelector {
  int top_m = 0;               // 0 = pass-through
  std::vector<size_t> keep;    // ascending column indices

  static FittedSelector fit(int top_m, const FeatureMatrix& train, const std::vector<int>& y) {
    FittedSelector s;
    s.top_m = top_m;
    if (top_m <= 0 || static_cast<size_t>(top_m) >= train.n_cols()) {
      s.top_m = top_m;
      for (size_t c = 0; c < train.n_cols(); ++c) s.keep.push_back(c);
      return s;
    }
    std::vector<std::pair<double, size_t>> gains(train.n_cols());
    for (size_t c = 0; c < train.n_cols(); ++c)
      gains[c] = {column_information_gain(train, c, y), c};
    std::stable_sort(gains.begin(), gains.end(), [](const auto& a, const auto& b) {
      return a.first > b.first;  // ties keep column order
    });
    for (int i = 0; i < top_m; ++i) s.keep.push_back(gains[static_cast<size_t>(i)].second);
    std::sort(s.keep.begin(), s.keep.end());
    return s;
  }

  FeatureMatrix apply(const FeatureMatrix& m) const {
    FeatureMatrix out;
    for (size_t c : keep) {
      out.info.push_back(m.info[c]);
      out.cols.push_back(m.cols[c]);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Genome

struct PipelineGenome {
  ImputerKind imputer = ImputerKind::median_mode;
  ScalerKind scaler = ScalerKind::none;
  int selector_m = 0;  // 0 = none
  ModelSpec model;

  std::string canonical() const {
    std::ostringstream out;
    out << "imp=" << imputer_name(imputer) << "|scl=" << scaler_name(scaler) << "|sel=";
    if (selector_m <= 0)
      out << "none";
    else
      out << "top" << selector_m;
    out << "|model=" << family_name(model.family) << "(depth=" << model.max_depth
        << ",min_leaf=" << model.min_samples_leaf;
    if (model.family == ModelFamily::tree) out << ",prune=" << (model.prune ? 1 : 0);
    if (model.family == ModelFamily::forest) out << ",trees=" << model.n_trees;
    if (model.family == ModelFamily::boosted)
      out << ",rounds=" << model.n_trees << ",lr=" << format_double(model.learning_rate);
    out << ")";
    return out.str();
  }

  static PipelineGenome parse(const std::string& text) {
    PipelineGenome g;
    std::map<std::string, std::string> kv;
    for (const auto& part : split(text, '|')) {
      const auto eq = part.find('=');
      if (eq == std::string::npos) throw ConfigError("genome parse: bad segment '" + part + "'");
      kv[trim(part.substr(0, eq))] = trim(part.substr(eq + 1));
    }
    auto need = [&](const char* key) {
      auto it = kv.find(key);
      if (it == kv.end()) throw ConfigError(std::string("genome parse: missing gene '") + key + "'");
      return it->second;
    };
    const std::string imp = need("imp");
    if (imp == "median_mode") g.imputer = ImputerKind::median_mode;
    else if (imp == "constant_zero") g.imputer = ImputerKind::constant_zero;
    else if (imp == "indicator") g.imputer = ImputerKind::indicator;
    else throw ConfigError("genome parse: unknown imputer " + imp);
    const std::string scl = need("scl");
    if (scl == "none") g.scaler = ScalerKind::none;
    else if (scl == "standardize") g.scaler = ScalerKind::standardize;
    else if (scl == "minmax") g.scaler = ScalerKind::minmax;
    else throw ConfigError("genome parse: unknown scaler " + scl);
    const std::string sel = need("sel");
    if (sel == "none") g.selector_m = 0;
    else if (sel.rfind("top", 0) == 0) g.selector_m = std::stoi(sel.substr(3));
    else throw ConfigError("genome parse: unknown selector " + sel);

    const std::string mdl = need("model");
    const auto open = mdl.find('(');
    if (open == std::string::npos || mdl.back() != ')')
      throw ConfigError("genome parse: malformed model gene " + mdl);
    const std::string fam = mdl.substr(0, open);
    if (fam == "tree") g.model.family = ModelFamily::tree;
    else if (fam == "forest") g.model.family = ModelFamily::forest;
    else if (fam == "boosted") g.model.family = ModelFamily::boosted;
    else throw ConfigError("genome parse: unknown model family " + fam);
    for (const auto& item : split(mdl.substr(open + 1, mdl.size() - open - 2), ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError("genome parse: bad model parameter " + item);
      const std::string key = trim(item.substr(0, eq));
      const std::string val = trim(item.substr(eq + 1));
      bool ok = false;
      if (key == "depth") g.model.max_depth = std::stoi(val);
      else if (key == "min_leaf") g.model.min_samples_leaf = std::stoi(val);
      else if (key == "trees" || key == "rounds") g.model.n_trees = std::stoi(val);
      else if (key == "lr") g.model.learning_rate = parse_double(val, ok);
      else if (key == "prune") g.model.prune = val == "1";
      else throw ConfigError("genome parse: unknown model parameter " + key);
    }
    if (g.model.family == ModelFamily::tree) g.model.n_trees = 1;  // not part of the gene
    return g;
  }
};

inline bool operator==(const ModelSpec& a, const ModelSpec& b) {
  return a.family == b.family && a.max_depth == b.max_depth &&
         a.min_samples_leaf == b.min_samples_leaf && a.n_trees == b.n_trees &&
         a.learning_rate == b.learning_rate && a.prune == b.prune;
}

inline bool operator==(const PipelineGenome& a, const PipelineGenome& b) {
  return a.imputer == b.imputer && a.scaler == b.scaler && a.selector_m == b.selector_m &&
         a.model == b.model;
}

// Fixed operator grammar: three imputers x three scalers x a selector grid x
// three tree-ensemble families with small hyperparameter grids.
struct Grammar {
  std::vector<ImputerKind> imputers{ImputerKind::median_mode, ImputerKind::constant_zero,
                                    ImputerKind::indicator};
  std::vector<ScalerKind> scalers{ScalerKind::none, ScalerKind::standardize, ScalerKind::minmax};
  std::vector<int> selector_m{0, 4, 8, 16};
  std::vector<ModelSpec> models;  // declaration order matters for grid-search ties

  static Grammar defaults() {
    Grammar g;
    for (int depth : {3, 5, 8, 12})
      for (int leaf : {1, 5, 20})
        for (int prune : {0, 1}) {
          ModelSpec m;
          m.family = ModelFamily::tree;
          m.max_depth = depth;
          m.min_samples_leaf = leaf;
          m.n_trees = 1;
          m.prune = prune == 1;
          g.models.push_back(m);
        }
    for (int trees : {25, 50, 100})
      for (int depth : {4, 8, 12}) {
        ModelSpec m;
        m.family = ModelFamily::forest;
        m.max_depth = depth;
        m.min_samples_leaf = 1;
        m.n_trees = trees;
        g.models.push_back(m);
      }
    for (int rounds : {50, 100, 200})
      for (int depth : {2, 3})
        for (double lr : {0.05, 0.1, 0.3}) {
          ModelSpec m;
          m.family = ModelFamily::boosted;
          m.max_depth = depth;
          m.min_samples_leaf = 1;
          m.n_trees = rounds;
          m.learning_rate = lr;
          g.models.push_back(m);
        }
    return g;
  }

  std::vector<ModelSpec> family_grid(ModelFamily f) const {
    std::vector<ModelSpec> out;
    for (const auto& m : models)
      if (m.family == f) out.push_back(m);
    return out;
  }

  bool contains(const PipelineGenome& g) const {
    const bool imp = std::find(imputers.begin(), imputers.end(), g.imputer) != imputers.end();
    const bool scl = std::find(scalers.begin(), scalers.end(), g.scaler) != scalers.end();
    const bool sel = std::find(selector_m.begin(), selector_m.end(), g.selector_m) != selector_m.end();
    const bool mdl = std::find(models.begin(), models.end(), g.model) != models.end();
    return imp && scl && sel && mdl;
  }

  PipelineGenome random(Rng& rng) const {
    PipelineGenome g;
    g.imputer = imputers[static_cast<size_t>(rng.below(imputers.size()))];
    g.scaler = scalers[static_cast<size_t>(rng.below(scalers.size()))];
    g.selector_m = selector_m[static_cast<size_t>(rng.below(selector_m.size()))];
    g.model = models[static_cast<size_t>(rng.below(models.size()))];
    return g;
  }

  // Changes exactly one gene; the redraw excludes the current value.
  PipelineGenome mutate(const PipelineGenome& g, Rng& rng) const {
    PipelineGenome out = g;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const auto gene = rng.below(4);
      if (gene == 0 && imputers.size() > 1) {
        ImputerKind v;
        do {
          v = imputers[static_cast<size_t>(rng.below(imputers.size()))];
        } while (v == g.imputer);
        out.imputer = v;
        return out;
      }
      if (gene == 1 && scalers.size() > 1) {
        ScalerKind v;
        do {
          v = scalers[static_cast<size_t>(rng.below(scalers.size()))];
        } while (v == g.scaler);
        out.scaler = v;
        return out;
      }
      if (gene == 2 && selector_m.size() > 1) {
        int v;
        do {
          v = selector_m[static_cast<size_t>(rng.below(selector_m.size()))];
        } while (v == g.selector_m);
        out.selector_m = v;
        return out;
      }
      if (gene == 3 && models.size() > 1) {
        ModelSpec v;
        do {
          v = models[static_cast<size_t>(rng.below(models.size()))];
        } while (v == g.model);
        out.model = v;
        return out;
      }
    }
    return out;  // degenerate grammar: nothing to change
  }

  // Each gene from a or b, fair coin.
  PipelineGenome crossover(const PipelineGenome& a, const PipelineGenome& b, Rng& rng) const {
    PipelineGenome out;
    out.imputer = rng.bernoulli(0.5) ? a.imputer : b.imputer;
    out.scaler = rng.bernoulli(0.5) ? a.scaler : b.scaler;
    out.selector_m = rng.bernoulli(0.5) ? a.selector_m : b.selector_m;
    out.model = rng.bernoulli(0.5) ? a.model : b.model;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Fitted pipeline: encoder + imputer + scaler + selector + model, trainable
// from a genome and serializable as one artifact.

struct FittedPipeline {
  PipelineGenome genome;
  std::string target;
  ModelEncoder encoder;
  FittedImputer imputer;
  FittedScaler scaler;
  FittedSelector selector;
  TreeEnsemble model;
  bool prune_applied = false;

  // Preprocessing only; mirrors the fit-time column layout.
  FeatureMatrix transform(const Dataset& d) const {
    FeatureMatrix m = encoder.transform(d);
    imputer.apply(m);
    scaler.apply(m);
    return selector.apply(m);
  }

  std::vector<double> predict_proba(const Dataset& d) const {
    const FeatureMatrix m = transform(d);
    return model.predict_proba_matrix(m);
  }
};

inline FittedPipeline fit_pipeline(const PipelineGenome& genome, const Dataset& train,
                                   const std::string& target, uint64_t seed, unsigned workers = 1,
                                   BoostFitInfo* boost_info = nullptr) {
  FittedPipeline p;
  p.genome = genome;
  p.target = target;
  p.encoder = ModelEncoder::build(train.schema());
  const size_t target_idx = train.schema().index_of(target);
  const std::vector<int> y = train.labels(target_idx);

  FeatureMatrix m = p.encoder.transform(train);
  p.imputer = FittedImputer::fit(genome.imputer, m);
  p.imputer.apply(m);
  p.scaler = FittedScaler::fit(genome.scaler, m);
  p.scaler.apply(m);
  p.selector = FittedSelector::fit(genome.selector_m, m, y);
  FeatureMatrix selected = p.selector.apply(m);

  if (genome.model.family == ModelFamily::tree && genome.model.prune) {
    // carve a pruning holdout off the training cohort
    Rng rng(derive_seed(seed, 0x9d70e));
    std::vector<size_t> order(selected.n_rows());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const size_t holdout_n = selected.n_rows() / 5;
    if (holdout_n >= 10) {
      std::vector<size_t> hold(order.begin(), order.begin() + static_cast<long>(holdout_n));
      std::vector<size_t> fit_rows(order.begin() + static_cast<long>(holdout_n), order.end());
      FeatureMatrix fit_m, hold_m;
      fit_m.info = hold_m.info = selected.info;
      for (const auto& col : selected.cols) {
        std::vector<double> a, b;
        a.reserve(fit_rows.size());
        b.reserve(hold.size());
        for (size_t r : fit_rows) a.push_back(col[r]);
        for (size_t r : hold) b.push_back(col[r]);
        fit_m.cols.push_back(std::move(a));
        hold_m.cols.push_back(std::move(b));
      }
      std::vector<int> fit_y, hold_y;
      for (size_t r : fit_rows) fit_y.push_back(y[r]);
      for (size_t r : hold) hold_y.push_back(y[r]);
      p.model = fit_model(fit_m, fit_y, genome.model, derive_seed(seed, 1), workers, boost_info);
      if (p.model.kind == EnsembleKind::single) {
        PruneResult pruned = prune(p.model.trees[0], hold_m, hold_y);
        p.model.trees[0] = std::move(pruned.tree);
        p.prune_applied = !pruned.holdout_empty;
      }
      return p;
    }
  }
  p.model = fit_model(selected, y, genome.model, derive_seed(seed, 1), workers, boost_info);
  return p;
}

// ---------------------------------------------------------------------------
// Pipeline serialization (versioned, human-diffable, exact round-trip)

inline std::string serialize_pipeline(const FittedPipeline& p) {
  std::ostringstream out;
  out << "ponvkit-pipeline " << kArtifactVersion << "\n";
  out << "target " << p.target << "\n";
  out << "genome " << p.genome.canonical() << "\n";
  out << "prune_applied " << (p.prune_applied ? 1 : 0) << "\n";
  out << "encoder " << p.encoder.columns.size() << "\n";
  for (const auto& c : p.encoder.columns)
    out << "enc onehot " << c.onehot_category << " discrete " << (c.discrete ? 1 : 0) << " feature "
        << c.feature << "\n";
  out << "imputer " << imputer_name(p.imputer.kind) << " " << p.imputer.fill.size() << "\n";
  for (double v : p.imputer.fill) out << "fill " << format_double(v) << "\n";
  out << "indicators " << p.imputer.indicator_cols.size() << "\n";
  for (size_t c : p.imputer.indicator_cols) out << "indicator " << c << "\n";
  out << "scaler " << scaler_name(p.scaler.kind) << " " << p.scaler.shift.size() << "\n";
  for (size_t i = 0; i < p.scaler.shift.size(); ++i)
    out << "scale " << format_double(p.scaler.shift[i]) << " " << format_double(p.scaler.scale[i])
        << "\n";
  out << "selector " << p.selector.top_m << " " << p.selector.keep.size() << "\n";
  for (size_t c : p.selector.keep) out << "keep " << c << "\n";
  out << serialize_model(p.model);
  return out.str();
}

inline FittedPipeline parse_pipeline(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  FittedPipeline p;
  std::ostringstream model_part;
  bool in_model = false;
  while (std::getline(in, line)) {
    if (in_model) {
      model_part << line << "\n";
      continue;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "ponvkit-pipeline") {
      int v = 0;
      ls >> v;
      if (v != kArtifactVersion) throw DataError("pipeline parse: unsupported version");
    } else if (tag == "target") {
      ls >> p.target;
    } else if (tag == "genome") {
      std::string g;
      ls >> g;
      p.genome = PipelineGenome::parse(g);
    } else if (tag == "prune_applied") {
      int v = 0;
      ls >> v;
      p.prune_applied = v == 1;
    } else if (tag == "encoder" || tag == "indicators") {
      // counts are implied by the entries
    } else if (tag == "enc") {
      std::string kw;
      EncoderColumn c;
      int discrete = 0;
      ls >> kw >> c.onehot_category >> kw >> discrete >> kw;
      std::getline(ls, c.feature);
      c.feature = trim(c.feature);
      c.discrete = discrete == 1;
      p.encoder.columns.push_back(std::move(c));
    } else if (tag == "imputer") {
      std::string kind;
      ls >> kind;
      if (kind == "median_mode") p.imputer.kind = ImputerKind::median_mode;
      else if (kind == "constant_zero") p.imputer.kind = ImputerKind::constant_zero;
      else if (kind == "indicator") p.imputer.kind = ImputerKind::indicator;
      else throw DataError("pipeline parse: unknown imputer " + kind);
    } else if (tag == "fill") {
      std::string v;
      ls >> v;
      p.imputer.fill.push_back(detail::must_double(v));
    } else if (tag == "indicator") {
      size_t c = 0;
      ls >> c;
      p.imputer.indicator_cols.push_back(c);
    } else if (tag == "scaler") {
      std::string kind;
      ls >> kind;
      if (kind == "none") p.scaler.kind = ScalerKind::none;
      else if (kind == "standardize") p.scaler.kind = ScalerKind::standardize;
      else if (kind == "minmax") p.scaler.kind = ScalerKind::minmax;
      else throw DataError("pipeline parse: unknown scaler " + kind);
    } else if (tag == "scale") {
      std::string a, b;
      ls >> a >> b;
      p.scaler.shift.push_back(detail::must_double(a));
      p.scaler.scale.push_back(detail::must_double(b));
    } else if (tag == "selector") {
      ls >> p.selector.top_m;
    } else if (tag == "keep") {
      size_t c = 0;
      ls >> c;
      p.selector.keep.push_back(c);
    } else if (tag == "ponvkit-model") {
      in_model = true;
      model_part << line << "\n";
    } else if (!tag.empty()) {
      throw DataError("pipeline parse: unexpected line '" + line + "'");
    }
  }
  p.model = parse_model(model_part.str());
  return p;
}

}  // namespace ponv
