// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ponv/common.hpp"
#include "ponv/csv.hpp"
#include "ponv/rng.hpp"
#include "ponv/schema.hpp"

namespace ponv {

// Immutable patient table. Cells are stored as doubles: continuous/ordinal
// values verbatim, binary as 0/1, categorical as the index into the schema's
// category list. Missingness is a parallel flag plane; targets never miss.
class Dataset {
 public:
  Dataset() = default;

  static Dataset from_parts(FeatureSchema schema, std::vector<std::vector<double>> columns,
                            std::vector<std::vector<uint8_t>> missing) {
    Dataset d;
    d.schema_ = std::move(schema);
    d.schema_.rebuild_index();
    d.columns_ = std::move(columns);
    d.missing_ = std::move(missing);
    if (d.columns_.size() != d.schema_.size() || d.missing_.size() != d.schema_.size())
      throw ContractError("dataset: column count does not match schema");
    d.rows_ = d.columns_.empty() ? 0 : d.columns_[0].size();
    for (size_t c = 0; c < d.columns_.size(); ++c)
      if (d.columns_[c].size() != d.rows_ || d.missing_[c].size() != d.rows_)
        throw ContractError("dataset: ragged columns");
    for (size_t t : d.schema_.target_indices())
      for (size_t r = 0; r < d.rows_; ++r)
        if (d.missing_[t][r]) throw ContractError("dataset: missing target value");
    return d;
  }

  const FeatureSchema& schema() const { return schema_; }
  size_t n_rows() const { return rows_; }
  size_t n_features() const { return columns_.size(); }

  double value(size_t feature, size_t row) const { return columns_[feature][row]; }
  bool is_missing(size_t feature, size_t row) const { return missing_[feature][row] != 0; }
  const std::vector<double>& column(size_t feature) const { return columns_[feature]; }
  const std::vector<uint8_t>& missing_flags(size_t feature) const { return missing_[feature]; }

  // 0/1 labels of one of the two targets
  std::vector<int> labels(size_t target_feature) const {
    std::vector<int> y(rows_);
    for (size_t r = 0; r < rows_; ++r) y[r] = columns_[target_feature][r] != 0.0 ? 1 : 0;
    return y;
  }

  Dataset subset(const std::vector<size_t>& rows) const {
    std::vector<std::vector<double>> cols(columns_.size());
    std::vector<std::vector<uint8_t>> miss(columns_.size());
    for (size_t c = 0; c < columns_.size(); ++c) {
      cols[c].reserve(rows.size());
      miss[c].reserve(rows.size());
      for (size_t r : rows) {
        cols[c].push_back(columns_[c][r]);
        miss[c].push_back(missing_[c][r]);
      }
    }
    return from_parts(schema_, std::move(cols), std::move(miss));
  }

  // Functional update: same rows without one predictor column.
  Dataset without_feature(const std::string& name) const {
    const size_t drop = schema_.index_of(name);
    if (schema_.is_target(drop)) throw ContractError("cannot drop a target column");
    FeatureSchema s;
    s.version = schema_.version;
    s.targets = schema_.targets;
    std::vector<std::vector<double>> cols;
    std::vector<std::vector<uint8_t>> miss;
    for (size_t c = 0; c < columns_.size(); ++c) {
      if (c == drop) continue;
      s.features.push_back(schema_.at(c));
      cols.push_back(columns_[c]);
      miss.push_back(missing_[c]);
    }
    s.rebuild_index();
    return from_parts(std::move(s), std::move(cols), std::move(miss));
  }

  // Functional update: appended standard-normal column (placed before the targets).
  Dataset with_noise_feature(const std::string& name, uint64_t seed) const {
    if (schema_.find(name)) throw ContractError("feature already exists: " + name);
    FeatureSchema s;
    s.version = schema_.version;
    s.targets = schema_.targets;
    std::vector<std::vector<double>> cols;
    std::vector<std::vector<uint8_t>> miss;
    Rng rng(seed);
    std::vector<double> noise(rows_);
    for (size_t r = 0; r < rows_; ++r) noise[r] = std::clamp(rng.normal(), -8.0, 8.0);
    bool inserted = false;
    for (size_t c = 0; c < columns_.size(); ++c) {
      if (!inserted && schema_.is_target(c)) {
        FeatureSpec f;
        f.name = name;
        f.kind = FeatureKind::continuous;
        f.min = -8.0;
        f.max = 8.0;
        s.features.push_back(f);
        cols.push_back(noise);
        miss.emplace_back(rows_, uint8_t{0});
        inserted = true;
      }
      s.features.push_back(schema_.at(c));
      cols.push_back(columns_[c]);
      miss.push_back(missing_[c]);
    }
    if (!inserted) {
      FeatureSpec f;
      f.name = name;
      f.kind = FeatureKind::continuous;
      f.min = -8.0;
      f.max = 8.0;
      s.features.push_back(f);
      cols.push_back(noise);
      miss.emplace_back(rows_, uint8_t{0});
    }
    s.rebuild_index();
    return from_parts(std::move(s), std::move(cols), std::move(miss));
  }

  void write_csv(std::ostream& out, const std::string& provenance = "") const {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    std::vector<std::string> header;
    for (const auto& f : schema_.features) header.push_back(f.name);
    out << csv::join_row(header) << "\n";
    std::vector<std::string> fields(schema_.size());
    for (size_t r = 0; r < rows_; ++r) {
      for (size_t c = 0; c < schema_.size(); ++c) {
        if (missing_[c][r]) {
          fields[c].clear();
          continue;
        }
        const auto& f = schema_.at(c);
        if (f.kind == FeatureKind::categorical)
          fields[c] = f.categories[static_cast<size_t>(columns_[c][r])];
        else
          fields[c] = format_double(columns_[c][r]);
      }
      out << csv::join_row(fields) << "\n";
    }
  }

 private:
  FeatureSchema schema_;
  std::vector<std::vector<double>> columns_;
  std::vector<std::vector<uint8_t>> missing_;
  size_t rows_ = 0;
};

struct RowRejection {
  size_t row = 0;  // 0-based data row ordinal
  std::string column;
  std::string reason;
};

struct LoadResult {
  Dataset data;
  std::vector<RowRejection> rejected;
};

namespace detail {

inline bool parse_cell(const FeatureSpec& f, const std::string& raw, double& value,
                       std::string& why, bool& structural) {
  structural = false;
  switch (f.kind) {
    case FeatureKind::continuous: {
      bool ok = false;
      value = parse_double(raw, ok);
      if (!ok) {
        structural = true;
        why = "unparseable number '" + raw + "'";
        return false;
      }
      if (value < f.min || value > f.max) {
        why = "value " + format_double(value) + " outside range [" + format_double(f.min) + "," +
              format_double(f.max) + "]";
        return false;
      }
      return true;
    }
    case FeatureKind::ordinal: {
      bool ok = false;
      value = parse_double(raw, ok);
      if (!ok || value != std::floor(value)) {
        structural = !ok;
        why = "not an integer code '" + raw + "'";
        return false;
      }
      if (value < f.min || value > f.max) {
        why = "code " + format_double(value) + " outside range [" + format_double(f.min) + "," +
              format_double(f.max) + "]";
        return false;
      }
      return true;
    }
    case FeatureKind::binary: {
      bool ok = false;
      value = parse_double(raw, ok);
      if (!ok) {
        structural = true;
        why = "unparseable boolean '" + raw + "' (expected 0/1)";
        return false;
      }
      if (value != 0.0 && value != 1.0) {
        why = "boolean value must be 0 or 1, got " + format_double(value);
        return false;
      }
      return true;
    }
    case FeatureKind::categorical: {
      const int idx = f.category_index(trim(raw));
      if (idx < 0) {
        why = "category '" + raw + "' not in schema set";
        return false;
      }
      value = idx;
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Loads and validates a CSV against the schema. Structural problems (missing
// or extra columns, unparseable cells) throw; rows failing the hard range and
// category checks, or missing a target, are excluded and reported.
inline LoadResult load_csv_rows(const std::vector<std::vector<std::string>>& raw,
                                const FeatureSchema& schema) {
  if (raw.empty()) throw DataError("csv: no header row");
  const auto& header = raw[0];
  std::vector<size_t> file_col_of(schema.size(), SIZE_MAX);
  for (size_t h = 0; h < header.size(); ++h) {
    const std::string name = trim(header[h]);
    auto idx = schema.find(name);
    if (!idx) throw DataError("csv: column '" + name + "' is not in the schema");
    if (file_col_of[*idx] != SIZE_MAX) throw DataError("csv: duplicate column '" + name + "'");
    file_col_of[*idx] = h;
  }
  for (size_t c = 0; c < schema.size(); ++c)
    if (file_col_of[c] == SIZE_MAX)
      throw DataError("csv: missing column '" + schema.at(c).name + "'");

  std::vector<std::vector<double>> cols(schema.size());
  std::vector<std::vector<uint8_t>> miss(schema.size());
  std::vector<RowRejection> rejected;
  std::vector<double> vals(schema.size(), 0.0);
  std::vector<uint8_t> row_missing(schema.size(), 0);

  for (size_t r = 1; r < raw.size(); ++r) {
    const auto& fields = raw[r];
    if (fields.size() != header.size())
      throw DataError("csv: row " + std::to_string(r - 1) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()));
    bool reject = false;
    RowRejection rej;
    for (size_t c = 0; c < schema.size() && !reject; ++c) {
      const std::string& raw_cell = fields[file_col_of[c]];
      const bool is_target = schema.is_target(c);
      if (trim(raw_cell).empty()) {
        if (is_target) {
          reject = true;
          rej = {r - 1, schema.at(c).name, "missing target value"};
        } else {
          row_missing[c] = 1;
          vals[c] = 0.0;
        }
        continue;
      }
      row_missing[c] = 0;
      std::string why;
      bool structural = false;
      if (!detail::parse_cell(schema.at(c), raw_cell, vals[c], why, structural)) {
        if (structural)
          throw DataError("csv: row " + std::to_string(r - 1) + ", column " + schema.at(c).name +
                          ": " + why);
        reject = true;
        rej = {r - 1, schema.at(c).name, why};
      }
    }
    if (reject) {
      rejected.push_back(std::move(rej));
      std::fill(row_missing.begin(), row_missing.end(), uint8_t{0});
      continue;
    }
    for (size_t c = 0; c < schema.size(); ++c) {
      cols[c].push_back(vals[c]);
      miss[c].push_back(row_missing[c]);
      row_missing[c] = 0;
    }
  }
  return {Dataset::from_parts(schema, std::move(cols), std::move(miss)), std::move(rejected)};
}

inline LoadResult load_csv(const std::string& path, const FeatureSchema& schema) {
  return load_csv_rows(csv::read_file(path), schema);
}

inline LoadResult load_csv_string(const std::string& text, const FeatureSchema& schema) {
  std::istringstream in(text);
  return load_csv_rows(csv::read_stream(in), schema);
}

// ---------------------------------------------------------------------------
// Synthetic desk-scale data with planted signal.

struct SynthConfig {
  size_t n = 2000;
  size_t informative = 5;
  size_t noise = 20;
  double prevalence_early = 0.15;
  double prevalence_delayed = 0.15;
  std::vector<double> weights;  // per informative feature; defaults to a decaying ramp
  double missing_rate = 0.0;    // applied to non-target cells
  bool demographics = true;     // AGE/GENDER/... block so scores and the splitter have inputs
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// intercept such that mean sigmoid(score + b) == prevalence
inline double calibrate_intercept(const std::vector<double>& scores, double prevalence) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double s : scores) mean += sigmoid(s + mid);
    mean /= static_cast<double>(scores.size());
    if (mean < prevalence)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Reproducible generator: one RNG stream per block, so the draw sequence is
// fixed regardless of configuration of other blocks.
inline Dataset synth_generate(const SynthConfig& cfg, uint64_t seed) {
  if (!(cfg.prevalence_early > 0.0 && cfg.prevalence_early < 1.0) ||
      !(cfg.prevalence_delayed > 0.0 && cfg.prevalence_delayed < 1.0))
    throw ConfigError("synth: prevalence must lie in (0,1)");
  if (cfg.informative == 0) throw ConfigError("synth: need at least one informative feature");

  FeatureSchema s;
  s.targets = {"PONV_PACU", "PONV_24H"};
  auto cont = [](const std::string& name, const std::string& unit, double lo, double hi) {
    FeatureSpec f;
    f.name = name;
    f.kind = FeatureKind::continuous;
    f.unit = unit;
    f.min = lo;
    f.max = hi;
    return f;
  };
  auto bin = [](const std::string& name, std::vector<std::string> labels = {}) {
    FeatureSpec f;
    f.name = name;
    f.kind = FeatureKind::binary;
    f.categories = std::move(labels);
    return f;
  };

  std::vector<std::vector<double>> cols;
  std::vector<std::vector<uint8_t>> miss;
  auto add_col = [&](const FeatureSpec& f, std::vector<double> v) {
    s.features.push_back(f);
    cols.push_back(std::move(v));
    miss.emplace_back(cfg.n, uint8_t{0});
  };

  const size_t n = cfg.n;
  if (cfg.demographics) {
    Rng demo(derive_seed(seed, 1));
    std::vector<double> age(n), gender(n), smoke(n), hx(n), migraine(n), dur(n), postopi(n),
        inhale(n), nitrous(n), dept(n);
    for (size_t r = 0; r < n; ++r) {
      age[r] = std::clamp(48.0 + 19.0 * demo.normal(), 18.0, 100.0);
      age[r] = std::round(age[r] * 100.0) / 100.0;
      gender[r] = demo.bernoulli(0.57) ? 1.0 : 0.0;
      smoke[r] = demo.bernoulli(0.21) ? 1.0 : 0.0;
      hx[r] = demo.bernoulli(0.05) ? 1.0 : 0.0;
      migraine[r] = demo.bernoulli(0.04) ? 1.0 : 0.0;
      dur[r] = std::clamp(std::round(std::exp(4.4 + 0.7 * demo.normal())), 5.0, 975.0);
      postopi[r] = demo.bernoulli(0.19) ? 1.0 : 0.0;
      inhale[r] = demo.bernoulli(0.77) ? 1.0 : 0.0;
      nitrous[r] = demo.bernoulli(0.05) ? 1.0 : 0.0;
      const double u = demo.uniform();
      dept[r] = u < 0.45 ? 0.0 : u < 0.70 ? 1.0 : u < 0.90 ? 2.0 : 3.0;
    }
    add_col(cont("AGE", "years", 18, 100), std::move(age));
    add_col(bin("GENDER", {"male", "female"}), std::move(gender));
    add_col(bin("SMOKE_STAT", {"non smoker", "smoker"}), std::move(smoke));
    add_col(bin("HX_PONV"), std::move(hx));
    add_col(bin("MIGRAINE"), std::move(migraine));
    add_col(cont("ANES_DUR", "min", 5, 975), std::move(dur));
    add_col(bin("POSTOPI_PACU"), std::move(postopi));
    add_col(bin("INHALE_ANES"), std::move(inhale));
    add_col(bin("NITROUS"), std::move(nitrous));
    FeatureSpec f;
    f.name = "OPER_DEPT";
    f.kind = FeatureKind::categorical;
    f.categories = {"general surgery", "orthopedic surgery", "gynecology", "urology"};
    add_col(f, std::move(dept));
  }

  Rng sig_rng(derive_seed(seed, 2));
  std::vector<std::vector<double>> sig(cfg.informative, std::vector<double>(n));
  for (size_t j = 0; j < cfg.informative; ++j)
    for (size_t r = 0; r < n; ++r) sig[j][r] = std::clamp(sig_rng.normal(), -8.0, 8.0);

  std::vector<double> weights = cfg.weights;
  if (weights.empty()) {
    weights.resize(cfg.informative);
    for (size_t j = 0; j < cfg.informative; ++j) weights[j] = 2.5 * std::pow(0.8, static_cast<double>(j));
  }
  if (weights.size() != cfg.informative)
    throw ConfigError("synth: weights size must equal the informative feature count");

  std::vector<double> score(n, 0.0);
  for (size_t j = 0; j < cfg.informative; ++j)
    for (size_t r = 0; r < n; ++r) score[r] += weights[j] * sig[j][r];

  for (size_t j = 0; j < cfg.informative; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "SIG_%02zu", j);
    add_col(cont(buf, "", -8, 8), std::move(sig[j]));
  }

  Rng noise_rng(derive_seed(seed, 3));
  for (size_t j = 0; j < cfg.noise; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "NOISE_%02zu", j);
    std::vector<double> v(n);
    for (size_t r = 0; r < n; ++r) v[r] = std::clamp(noise_rng.normal(), -8.0, 8.0);
    add_col(cont(buf, "", -8, 8), std::move(v));
  }

  const double prevalences[2] = {cfg.prevalence_early, cfg.prevalence_delayed};
  const char* target_names[2] = {"PONV_PACU", "PONV_24H"};
  for (int t = 0; t < 2; ++t) {
    const double b0 = detail::calibrate_intercept(score, prevalences[t]);
    Rng draw(derive_seed(seed, 4 + static_cast<uint64_t>(t)));
    std::vector<double> y(n);
    for (size_t r = 0; r < n; ++r) y[r] = draw.bernoulli(detail::sigmoid(score[r] + b0)) ? 1.0 : 0.0;
    add_col(bin(target_names[t]), std::move(y));
  }

  if (cfg.missing_rate > 0.0) {
    Rng gaps(derive_seed(seed, 6));
    for (size_t c = 0; c < s.features.size(); ++c) {
      bool is_target = false;
      for (const auto& t : s.targets) is_target |= s.features[c].name == t;
      if (is_target) continue;
      for (size_t r = 0; r < n; ++r)
        if (gaps.bernoulli(cfg.missing_rate)) miss[c][r] = 1;
    }
  }

  s.rebuild_index();
  s.validate();
  return Dataset::from_parts(std::move(s), std::move(cols), std::move(miss));
}

}  // namespace ponv
