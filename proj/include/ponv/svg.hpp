// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "ponv/csv.hpp"
#include "ponv/evaluation.hpp"

namespace ponv {

// Small self-contained SVG emitters. Plots are result displays; the numbers
// behind them are always written as CSV next to the figure.
namespace svg {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#17becf"};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string roc_plot(const std::vector<std::pair<std::string, const RocCurve*>>& curves,
                            const std::string& title, const std::string& provenance) {
  const double w = 460, h = 420, left = 60, top = 40, plot = 320;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  if (!provenance.empty()) out << "<!-- " << escape(provenance) << " -->\n";
  out << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">"
      << escape(title) << "</text>\n";
  auto X = [&](double fpr) { return left + fpr * plot; };
  auto Y = [&](double tpr) { return top + (1.0 - tpr) * plot; };
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot << "\" height=\"" << plot
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<line x1=\"" << X(0) << "\" y1=\"" << Y(0) << "\" x2=\"" << X(1) << "\" y2=\"" << Y(1)
      << "\" stroke=\"#bbb\" stroke-dasharray=\"4 4\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick / 4.0;
    out << "<text x=\"" << X(v) - 8 << "\" y=\"" << top + plot + 18
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(v) << "</text>\n";
    out << "<text x=\"" << left - 34 << "\" y=\"" << Y(v) + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(v) << "</text>\n";
  }
  out << "<text x=\"" << left + plot / 2 - 60 << "\" y=\"" << top + plot + 38
      << "\" font-family=\"sans-serif\" font-size=\"12\">false positive rate</text>\n";
  size_t ci = 0;
  for (const auto& [name, curve] : curves) {
    const char* color = kPalette[ci % 7];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (const auto& [fpr, tpr] : curve->points) out << X(fpr) << "," << Y(tpr) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << left + plot + 8 << "\" y=\"" << top + 16 + 18 * static_cast<double>(ci)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">" << escape(name)
        << " (auc " << format_double(std::round(curve->auc * 1000.0) / 1000.0) << ")</text>\n";
    ++ci;
  }
  out << "</svg>\n";
  return out.str();
}

inline std::string bar_plot(const std::vector<std::pair<std::string, double>>& bars,
                            const std::string& title, const std::string& provenance) {
  const double bar_h = 18, gap = 6, left = 190, top = 44;
  const double plot_w = 320;
  double vmax = 1e-12;
  for (const auto& [_, v] : bars) vmax = std::max(vmax, std::fabs(v));
  const double h = top + static_cast<double>(bars.size()) * (bar_h + gap) + 20;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + plot_w + 80 << "\" height=\""
      << h << "\">\n";
  if (!provenance.empty()) out << "<!-- " << escape(provenance) << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"12\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  double y = top;
  for (const auto& [name, v] : bars) {
    const double bw = plot_w * std::fabs(v) / vmax;
    out << "<text x=\"" << left - 8 << "\" y=\"" << y + bar_h - 5
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << escape(name)
        << "</text>\n";
    out << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << bw << "\" height=\"" << bar_h
        << "\" fill=\"" << (v >= 0 ? kPalette[0] : kPalette[1]) << "\"/>\n";
    out << "<text x=\"" << left + bw + 6 << "\" y=\"" << y + bar_h - 5
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(std::round(v * 10000.0) / 10000.0)
        << "</text>\n";
    y += bar_h + gap;
  }
  out << "</svg>\n";
  return out.str();
}

// Beeswarm-style strip plot: one row per feature, x = attribution, color from
// blue (low feature value) to red (high), y jittered by value rank.
inline std::string shap_strip_plot(const std::vector<std::string>& names,
                                   const std::vector<std::vector<double>>& phi,
                                   const std::vector<std::vector<double>>& values,
                                   const std::vector<size_t>& order, size_t top_n,
                                   const std::string& title, const std::string& provenance) {
  const size_t rows = std::min(top_n, order.size());
  const double row_h = 34, left = 200, top = 48, plot_w = 420;
  double vmax = 1e-12;
  for (const auto& rec : phi)
    for (size_t i = 0; i < rows; ++i) vmax = std::max(vmax, std::fabs(rec[order[i]]));
  const double h = top + static_cast<double>(rows) * row_h + 30;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + plot_w + 40 << "\" height=\""
      << h << "\">\n";
  if (!provenance.empty()) out << "<!-- " << escape(provenance) << " -->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"12\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  const double x0 = left + plot_w / 2.0;
  out << "<line x1=\"" << x0 << "\" y1=\"" << top - 8 << "\" x2=\"" << x0 << "\" y2=\""
      << top + static_cast<double>(rows) * row_h << "\" stroke=\"#999\"/>\n";
  for (size_t i = 0; i < rows; ++i) {
    const size_t f = order[i];
    const double yc = top + (static_cast<double>(i) + 0.5) * row_h;
    out << "<text x=\"" << left - 8 << "\" y=\"" << yc + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << escape(names[f])
        << "</text>\n";
    // per-feature value percentiles drive the color ramp
    std::vector<double> vals;
    for (const auto& rec : values) vals.push_back(rec[f]);
    std::vector<double> sorted = vals;
    std::sort(sorted.begin(), sorted.end());
    for (size_t r = 0; r < phi.size(); ++r) {
      const double x = x0 + phi[r][f] / vmax * (plot_w / 2.0 - 6.0);
      const double pct =
          sorted.back() > sorted.front()
              ? static_cast<double>(std::lower_bound(sorted.begin(), sorted.end(), vals[r]) - sorted.begin()) /
                    static_cast<double>(sorted.size() - 1)
              : 0.5;
      const int red = static_cast<int>(31 + pct * (214 - 31));
      const int blue = static_cast<int>(180 - pct * (180 - 40));
      const double jitter = (static_cast<double>((r * 2654435761u) % 1000) / 1000.0 - 0.5) * (row_h - 10);
      out << "<circle cx=\"" << x << "\" cy=\"" << yc + jitter << "\" r=\"2\" fill=\"rgb(" << red
          << ",60," << blue << ")\" fill-opacity=\"0.7\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace svg
}  // namespace ponv
