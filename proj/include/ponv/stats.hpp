// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "ponv/dataset.hpp"

namespace ponv {

struct CategoryCount {
  std::string label;
  size_t count = 0;
  double percent = 0.0;  // of non-missing
};

struct StatsEntry {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  size_t n_present = 0;
  bool no_data = false;
  // continuous summary
  double min = 0, max = 0, mean = 0, sd = 0, median = 0;
  // binary / categorical / ordinal distribution
  std::vector<CategoryCount> categories;
};

struct StatsTable {
  std::vector<StatsEntry> entries;

  void write_csv(std::ostream& out, const std::string& provenance = "") const {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "feature,kind,n,min,max,mean,sd,median,category,count,percent\n";
    for (const auto& e : entries) {
      if (e.kind == FeatureKind::continuous) {
        std::vector<std::string> row{e.name, kind_name(e.kind), std::to_string(e.n_present)};
        if (e.no_data) {
          row.insert(row.end(), {"", "", "", "", "", "no data", "", ""});
        } else {
          row.insert(row.end(), {format_double(e.min), format_double(e.max), format_double(e.mean),
                                 format_double(e.sd), format_double(e.median), "", "", ""});
        }
        out << csv::join_row(row) << "\n";
      } else {
        if (e.no_data) {
          out << csv::join_row({e.name, kind_name(e.kind), "0", "", "", "", "", "", "no data", "", ""})
              << "\n";
          continue;
        }
        for (const auto& c : e.categories) {
          out << csv::join_row({e.name, kind_name(e.kind), std::to_string(e.n_present), "", "", "",
                                "", "", c.label, std::to_string(c.count), format_double(c.percent)})
              << "\n";
        }
      }
    }
  }
};

// Per-feature summaries over non-missing values. Continuous features get the
// five-number-ish summary (sample SD, n-1 denominator); everything discrete
// gets per-category counts and percentages.
inline StatsTable descriptive_stats(const Dataset& d) {
  if (d.n_rows() == 0) throw ContractError("descriptive_stats: empty dataset");
  StatsTable table;
  for (size_t c = 0; c < d.schema().size(); ++c) {
    const auto& f = d.schema().at(c);
    StatsEntry e;
    e.name = f.name;
    e.kind = f.kind;
    if (f.kind == FeatureKind::continuous) {
      // Welford; the test suite cross-checks against a two-pass oracle
      double mean = 0, m2 = 0, mn = 0, mx = 0;
      size_t n = 0;
      std::vector<double> present;
      for (size_t r = 0; r < d.n_rows(); ++r) {
        if (d.is_missing(c, r)) continue;
        const double v = d.value(c, r);
        present.push_back(v);
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
        if (n == 1) {
          mn = mx = v;
        } else {
          mn = std::min(mn, v);
          mx = std::max(mx, v);
        }
      }
      e.n_present = n;
      if (n == 0) {
        e.no_data = true;
      } else {
        e.min = mn;
        e.max = mx;
        e.mean = mean;
        e.sd = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0;
        std::sort(present.begin(), present.end());
        e.median = n % 2 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
      }
    } else {
      std::vector<std::string> labels;
      if (f.kind == FeatureKind::binary) {
        labels = f.categories.size() == 2 ? f.categories : std::vector<std::string>{"0", "1"};
      } else if (f.kind == FeatureKind::categorical) {
        labels = f.categories;
      } else {  // ordinal: one bucket per integer code in range
        for (long v = static_cast<long>(f.min); v <= static_cast<long>(f.max); ++v)
          labels.push_back(std::to_string(v));
      }
      std::vector<size_t> counts(labels.size(), 0);
      size_t n = 0;
      for (size_t r = 0; r < d.n_rows(); ++r) {
        if (d.is_missing(c, r)) continue;
        ++n;
        size_t idx = 0;
        if (f.kind == FeatureKind::ordinal)
          idx = static_cast<size_t>(d.value(c, r) - f.min);
        else
          idx = static_cast<size_t>(d.value(c, r));
        if (idx < counts.size()) ++counts[idx];
      }
      e.n_present = n;
      if (n == 0) {
        e.no_data = true;
      } else {
        for (size_t i = 0; i < labels.size(); ++i) {
          CategoryCount cc;
          cc.label = labels[i];
          cc.count = counts[i];
          cc.percent = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(n);
          e.categories.push_back(std::move(cc));
        }
      }
    }
    table.entries.push_back(std::move(e));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Correlation

enum class CorrelationMethod { pearson, spearman };

struct CorrelationMatrix {
  std::vector<std::string> names;
  CorrelationMethod method = CorrelationMethod::pearson;
  std::vector<double> values;  // row-major, names.size() square
  std::vector<uint8_t> flags;  // 1 = degenerate pair (zero variance / too few rows), value forced to 0

  double at(size_t i, size_t j) const { return values[i * names.size() + j]; }
  bool flagged(size_t i, size_t j) const { return flags[i * names.size() + j] != 0; }

  void write_csv(std::ostream& out, const std::string& provenance = "") const {
    if (!provenance.empty()) out << "# " << provenance << "\n";
    std::vector<std::string> header{"feature"};
    header.insert(header.end(), names.begin(), names.end());
    out << csv::join_row(header) << "\n";
    for (size_t i = 0; i < names.size(); ++i) {
      std::vector<std::string> row{names[i]};
      for (size_t j = 0; j < names.size(); ++j) row.push_back(format_double(at(i, j)));
      out << csv::join_row(row) << "\n";
    }
  }
};

// One numeric column per feature so each feature occupies one correlation
// cell: binary 0/1, ordinal codes verbatim, unordered categoricals as
// frequency-rank codes (most frequent over non-missing rows = 0, ties by
// declaration order).
inline void encode_for_correlation(const Dataset& d, size_t feature, std::vector<double>& out) {
  const auto& f = d.schema().at(feature);
  out.resize(d.n_rows());
  if (f.kind != FeatureKind::categorical) {
    for (size_t r = 0; r < d.n_rows(); ++r) out[r] = d.value(feature, r);
    return;
  }
  std::vector<size_t> counts(f.categories.size(), 0);
  for (size_t r = 0; r < d.n_rows(); ++r)
    if (!d.is_missing(feature, r)) ++counts[static_cast<size_t>(d.value(feature, r))];
  std::vector<size_t> order(counts.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return counts[a] > counts[b]; });
  std::vector<double> code(counts.size());
  for (size_t rank = 0; rank < order.size(); ++rank) code[order[rank]] = static_cast<double>(rank);
  for (size_t r = 0; r < d.n_rows(); ++r)
    out[r] = d.is_missing(feature, r) ? 0.0 : code[static_cast<size_t>(d.value(feature, r))];
}

namespace detail {

// average ranks, ties share the mean rank
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson_of(const std::vector<double>& x, const std::vector<double>& y, bool& degenerate) {
  const size_t n = x.size();
  degenerate = false;
  if (n < 2) {
    degenerate = true;
    return 0.0;
  }
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    degenerate = true;
    return 0.0;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace detail

// Pairwise complete-case correlation over all schema features (targets
// included). Spearman is Pearson on fractional ranks computed within each
// pair's complete-case subset.
inline CorrelationMatrix correlation(const Dataset& d, CorrelationMethod method) {
  if (d.n_rows() < 2) throw ContractError("correlation: need at least two rows");
  const size_t p = d.schema().size();
  CorrelationMatrix m;
  m.method = method;
  for (size_t i = 0; i < p; ++i) m.names.push_back(d.schema().at(i).name);
  m.values.assign(p * p, 0.0);
  m.flags.assign(p * p, 0);

  std::vector<std::vector<double>> enc(p);
  for (size_t i = 0; i < p; ++i) encode_for_correlation(d, i, enc[i]);

  std::vector<double> xs, ys;
  for (size_t i = 0; i < p; ++i) {
    // diagonal: 1 unless the feature has no variance
    std::vector<double> self;
    for (size_t r = 0; r < d.n_rows(); ++r)
      if (!d.is_missing(i, r)) self.push_back(enc[i][r]);
    const bool constant =
        self.size() < 2 || std::all_of(self.begin(), self.end(), [&](double v) { return v == self[0]; });
    m.values[i * p + i] = constant ? 0.0 : 1.0;
    m.flags[i * p + i] = constant ? 1 : 0;

    for (size_t j = i + 1; j < p; ++j) {
      xs.clear();
      ys.clear();
      for (size_t r = 0; r < d.n_rows(); ++r) {
        if (d.is_missing(i, r) || d.is_missing(j, r)) continue;
        xs.push_back(enc[i][r]);
        ys.push_back(enc[j][r]);
      }
      bool degenerate = false;
      double rho = 0.0;
      if (method == CorrelationMethod::pearson) {
        rho = detail::pearson_of(xs, ys, degenerate);
      } else {
        const auto rx = detail::fractional_ranks(xs);
        const auto ry = detail::fractional_ranks(ys);
        rho = detail::pearson_of(rx, ry, degenerate);
      }
      m.values[i * p + j] = m.values[j * p + i] = rho;
      m.flags[i * p + j] = m.flags[j * p + i] = degenerate ? 1 : 0;
    }
  }
  return m;
}

}  // namespace ponv
