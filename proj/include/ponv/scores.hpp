// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ponv/dataset.hpp"

namespace ponv {

// Additive clinical risk scores: each satisfied factor contributes one point.
// Factor predicates are declarative so the shipped defaults can be audited
// and overridden from the config file.

enum class CmpOp { eq, ne, lt, le, gt, ge };

struct Condition {
  std::string feature;
  CmpOp op = CmpOp::eq;
  std::string raw_value;  // number or a category label, resolved at bind time
};

struct Factor {
  std::vector<Condition> any_of;  // OR of conditions
  std::string text;               // original declaration, for reports
};

struct ScoreDefinition {
  std::string name;
  int max_score = 0;
  std::vector<Factor> factors;
};

namespace detail {

inline CmpOp parse_op(const std::string& s) {
  if (s == "==") return CmpOp::eq;
  if (s == "!=") return CmpOp::ne;
  if (s == "<") return CmpOp::lt;
  if (s == "<=") return CmpOp::le;
  if (s == ">") return CmpOp::gt;
  if (s == ">=") return CmpOp::ge;
  throw ConfigError("score factor: unknown operator '" + s + "'");
}

}  // namespace detail

// Grammar: `FEATURE op VALUE [or FEATURE op VALUE]...`
inline Factor parse_factor(const std::string& text) {
  Factor f;
  f.text = trim(text);
  for (const std::string& clause : [&] {
         std::vector<std::string> cs;
         std::string rest = f.text;
         while (true) {
           const size_t pos = rest.find(" or ");
           if (pos == std::string::npos) {
             cs.push_back(rest);
             break;
           }
           cs.push_back(rest.substr(0, pos));
           rest = rest.substr(pos + 4);
         }
         return cs;
       }()) {
    std::vector<std::string> tokens;
    for (auto& t : split(trim(clause), ' '))
      if (!trim(t).empty()) tokens.push_back(trim(t));
    if (tokens.size() < 3) throw ConfigError("score factor needs FEATURE OP VALUE: " + clause);
    Condition c;
    c.feature = tokens[0];
    c.op = detail::parse_op(tokens[1]);
    // category labels may contain spaces
    c.raw_value = tokens[2];
    for (size_t i = 3; i < tokens.size(); ++i) c.raw_value += " " + tokens[i];
    f.any_of.push_back(std::move(c));
  }
  return f;
}

// A definition resolved against a schema: feature indices and numeric
// comparison values fixed up front.
class BoundScore {
 public:
  BoundScore(const ScoreDefinition& def, const FeatureSchema& schema) : def_(def) {
    for (const auto& factor : def.factors) {
      std::vector<std::pair<size_t, std::pair<CmpOp, double>>> bound;
      for (const auto& c : factor.any_of) {
        const size_t idx = schema.index_of(c.feature);
        bool ok = false;
        double v = parse_double(c.raw_value, ok);
        if (!ok) {
          const int ci = schema.at(idx).category_index(c.raw_value);
          if (ci < 0)
            throw ConfigError("score factor: value '" + c.raw_value + "' is neither numeric nor a category of " +
                              c.feature);
          v = ci;
        }
        bound.push_back({idx, {c.op, v}});
      }
      factors_.push_back(std::move(bound));
    }
  }

  const ScoreDefinition& definition() const { return def_; }

  // Missing factor inputs count as factor-absent.
  int score(const Dataset& d, size_t row) const {
    int s = 0;
    for (const auto& factor : factors_) {
      bool satisfied = false;
      for (const auto& [idx, cmp] : factor) {
        if (d.is_missing(idx, row)) continue;
        const double x = d.value(idx, row);
        const double v = cmp.second;
        bool hit = false;
        switch (cmp.first) {
          case CmpOp::eq: hit = x == v; break;
          case CmpOp::ne: hit = x != v; break;
          case CmpOp::lt: hit = x < v; break;
          case CmpOp::le: hit = x <= v; break;
          case CmpOp::gt: hit = x > v; break;
          case CmpOp::ge: hit = x >= v; break;
        }
        if (hit) {
          satisfied = true;
          break;
        }
      }
      if (satisfied) ++s;
    }
    return s;
  }

  std::vector<int> score_all(const Dataset& d) const {
    std::vector<int> out(d.n_rows());
    for (size_t r = 0; r < d.n_rows(); ++r) out[r] = score(d, r);
    return out;
  }

 private:
  ScoreDefinition def_;
  std::vector<std::vector<std::pair<size_t, std::pair<CmpOp, double>>>> factors_;
};

// Shipped factor sets. The 0/1 comparisons follow the schema conventions
// (GENDER 1 = female, SMOKE_STAT 1 = smoker); MIGRAINE stands in for a
// motion-sickness history column where none exists.
inline ScoreDefinition apfel_definition() {
  ScoreDefinition d;
  d.name = "apfel";
  d.max_score = 4;
  d.factors = {parse_factor("GENDER == 1"), parse_factor("SMOKE_STAT == 0"),
               parse_factor("HX_PONV == 1"), parse_factor("POSTOPI_PACU == 1")};
  return d;
}

inline ScoreDefinition koivuranta_definition() {
  ScoreDefinition d;
  d.name = "koivuranta";
  d.max_score = 5;
  d.factors = {parse_factor("GENDER == 1"), parse_factor("SMOKE_STAT == 0"),
               parse_factor("HX_PONV == 1"), parse_factor("MIGRAINE == 1"),
               parse_factor("ANES_DUR > 60")};
  return d;
}

inline ScoreDefinition guideline_definition() {
  ScoreDefinition d;
  d.name = "guideline";
  d.max_score = 6;
  d.factors = {parse_factor("GENDER == 1"),  parse_factor("SMOKE_STAT == 0"),
               parse_factor("HX_PONV == 1"), parse_factor("AGE < 50"),
               parse_factor("INHALE_ANES == 1 or NITROUS == 1"),
               parse_factor("POSTOPI_PACU == 1")};
  return d;
}

// ---------------------------------------------------------------------------
// Turning integer scores into binary predictions

struct ScoreThresholdPolicy {
  enum class Kind { fixed, fit } kind = Kind::fit;
  int fixed_value = 2;
};

inline std::vector<int> apply_threshold(const std::vector<int>& scores, int threshold) {
  std::vector<int> preds(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= threshold ? 1 : 0;
  return preds;
}

// F1 over candidate thresholds 0..max_score; ties break toward the lower
// threshold. Degenerate F1 (no predicted or no actual positives) counts as 0.
inline int fit_threshold_f1(const std::vector<int>& scores, const std::vector<int>& labels,
                            int max_score) {
  if (scores.empty() || scores.size() != labels.size())
    throw ContractError("fit_threshold_f1: empty or mismatched inputs");
  int best_t = 0;
  double best_f1 = -1.0;
  for (int t = 0; t <= max_score; ++t) {
    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      const bool pred = scores[i] >= t;
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

inline std::pair<int, std::vector<int>> score_predict(const std::vector<int>& scores,
                                                      const std::vector<int>& labels,
                                                      const ScoreThresholdPolicy& policy,
                                                      int max_score = -1) {
  if (scores.empty() || scores.size() != labels.size())
    throw ContractError("score_predict: empty or mismatched inputs");
  int t = policy.fixed_value;
  if (policy.kind == ScoreThresholdPolicy::Kind::fit) {
    if (max_score < 0)
      for (int s : scores) max_score = std::max(max_score, s);
    t = fit_threshold_f1(scores, labels, max_score);
  }
  return {t, apply_threshold(scores, t)};
}

}  // namespace ponv
