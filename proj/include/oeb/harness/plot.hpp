/*
 * Copyright 2026 The oebsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef OEB_HARNESS_PLOT_HPP
#define OEB_HARNESS_PLOT_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oeb/harness/table.hpp"

namespace oeb::harness {

enum class PlotKind { kRewardVariance, kBiasVsReward, kInclusionCheck };

inline PlotKind parse_plot_kind(const std::string& name) {
  if (name == "reward-variance") return PlotKind::kRewardVariance;
  if (name == "bias-vs-reward") return PlotKind::kBiasVsReward;
  if (name == "inclusion-check") return PlotKind::kInclusionCheck;
  throw std::invalid_argument("unknown plot kind '" + name + "'");
}

namespace plot_detail {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

inline const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(5);
  ss << v;
  return ss.str();
}

/// Tick positions: a handful of round-ish values across [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
  std::vector<double> out;
  for (int i = 0; i <= 4; ++i) out.push_back(lo + (hi - lo) * i / 4.0);
  return out;
}

inline std::string render(const std::vector<Series>& series, const std::string& title,
                          const std::string& xlabel, const std::string& ylabel,
                          bool identity_line) {
  const double width = 800, height = 560;
  const double l = 80, r = 630, t = 50, b = 500;  // plot box
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << (l + r) / 2 << "\" y=\"28\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"18\">" << title << "</text>\n";
  svg << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << r - l << "\" height=\""
      << b - t << "\" fill=\"none\" stroke=\"black\"/>\n";

  bool any = false;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xlo = xhi = x;
        ylo = yhi = y;
        any = true;
      }
      xlo = std::min(xlo, x);
      xhi = std::max(xhi, x);
      ylo = std::min(ylo, y);
      yhi = std::max(yhi, y);
    }
  }
  if (any) {
    if (identity_line) {
      const double lo = std::min(xlo, ylo), hi = std::max(xhi, yhi);
      xlo = ylo = lo;
      xhi = yhi = hi;
    }
    if (xhi == xlo) {
      xlo -= 0.5;
      xhi += 0.5;
    }
    if (yhi == ylo) {
      ylo -= 0.5;
      yhi += 0.5;
    }
    const double xpad = 0.04 * (xhi - xlo), ypad = 0.04 * (yhi - ylo);
    xlo -= xpad;
    xhi += xpad;
    ylo -= ypad;
    yhi += ypad;
  }
  auto sx = [&](double x) { return l + (x - xlo) / (xhi - xlo) * (r - l); };
  auto sy = [&](double y) { return b - (y - ylo) / (yhi - ylo) * (b - t); };

  for (double tx : plot_detail::ticks(xlo, xhi)) {
    svg << "<line x1=\"" << sx(tx) << "\" y1=\"" << b << "\" x2=\"" << sx(tx)
        << "\" y2=\"" << b + 6 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << sx(tx) << "\" y=\"" << b + 22
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt(tx) << "</text>\n";
  }
  for (double ty : plot_detail::ticks(ylo, yhi)) {
    svg << "<line x1=\"" << l - 6 << "\" y1=\"" << sy(ty) << "\" x2=\"" << l
        << "\" y2=\"" << sy(ty) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << l - 10 << "\" y=\"" << sy(ty) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt(ty) << "</text>\n";
  }
  svg << "<text x=\"" << (l + r) / 2 << "\" y=\"" << b + 45
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << xlabel << "</text>\n";
  svg << "<text x=\"22\" y=\"" << (t + b) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
      << "transform=\"rotate(-90 22 " << (t + b) / 2 << ")\">" << ylabel << "</text>\n";

  if (!any) {
    svg << "<text x=\"" << (l + r) / 2 << "\" y=\"" << (t + b) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"20\" "
        << "fill=\"#888\">no data</text>\n";
  } else {
    if (identity_line) {
      svg << "<line x1=\"" << sx(xlo) << "\" y1=\"" << sy(xlo) << "\" x2=\"" << sx(xhi)
          << "\" y2=\"" << sy(xhi)
          << "\" stroke=\"#999\" stroke-dasharray=\"5,4\"/>\n";
    }
    int color_index = 0;
    for (const auto& s : series) {
      const char* color = kPalette[color_index % 8];
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" "
          << "points=\"";
      for (const auto& [x, y] : s.points) svg << sx(x) << ',' << sy(y) << ' ';
      svg << "\"/>\n";
      for (const auto& [x, y] : s.points)
        svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3.5\" fill=\""
            << color << "\"/>\n";
      const double ly = t + 18 + 22 * color_index;
      svg << "<rect x=\"" << r + 16 << "\" y=\"" << ly - 10
          << "\" width=\"14\" height=\"14\" fill=\"" << color << "\"/>\n";
      svg << "<text x=\"" << r + 36 << "\" y=\"" << ly + 2
          << "\" font-family=\"sans-serif\" font-size=\"13\">" << s.label
          << "</text>\n";
      ++color_index;
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace plot_detail

/**
 * Renders an aggregate or sweep CSV into a self-contained SVG. For
 * reward-variance and bias-vs-reward the table must carry the aggregate
 * schema (the final period is used when a period column is present) and one
 * polyline is drawn per strategy, points ordered by parameter. For
 * inclusion-check the table must carry id,target,empirical and a scatter
 * plus identity line is drawn.
 *
 * `column` picks the y column for the first two kinds (default var_ipw /
 * bias_ipw).
 */
inline std::string plot_svg(const Table& table, PlotKind kind,
                            std::string column = "") {
  std::vector<plot_detail::Series> series;
  if (kind == PlotKind::kInclusionCheck) {
    for (const char* col : {"id", "target", "empirical"})
      if (!table.has_column(col))
        throw std::invalid_argument(std::string("plot: expected column '") + col +
                                    "' in inclusion-check input");
    plot_detail::Series s;
    s.label = "empirical";
    const auto cx = table.column("target"), cy = table.column("empirical");
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      s.points.emplace_back(table.number(i, cx), table.number(i, cy));
    std::sort(s.points.begin(), s.points.end());
    series.push_back(std::move(s));
    return plot_detail::render(series, "Empirical vs target inclusion probability",
                               "target", "empirical", /*identity_line=*/true);
  }

  if (column.empty())
    column = kind == PlotKind::kRewardVariance ? "var_ipw" : "bias_ipw";
  for (const char* col : {"strategy", "param", "mean_reward"})
    if (!table.has_column(col))
      throw std::invalid_argument(std::string("plot: expected column '") + col +
                                  "' in aggregate input");
  if (!table.has_column(column))
    throw std::invalid_argument("plot: expected column '" + column + "'");

  // Final period only, when a period column exists.
  std::vector<std::size_t> keep;
  if (table.has_column("period")) {
    const auto cp = table.column("period");
    double last = 0.0;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      last = std::max(last, table.number(i, cp));
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      if (table.number(i, cp) == last) keep.push_back(i);
  } else {
    for (std::size_t i = 0; i < table.rows.size(); ++i) keep.push_back(i);
  }

  const auto cs = table.column("strategy");
  const auto cparam = table.column("param");
  const auto cx = table.column("mean_reward");
  const auto cy = table.column(column);
  std::map<std::string, std::vector<std::pair<double, std::pair<double, double>>>> grouped;
  for (std::size_t i : keep)
    grouped[table.rows[i][cs]].push_back(
        {table.number(i, cparam), {table.number(i, cx), table.number(i, cy)}});
  for (auto& [label, pts] : grouped) {
    std::sort(pts.begin(), pts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    plot_detail::Series s;
    s.label = label;
    for (const auto& [param, xy] : pts) s.points.push_back(xy);
    series.push_back(std::move(s));
  }
  const std::string title = kind == PlotKind::kRewardVariance
                                ? "Reward vs " + column
                                : column + " vs reward";
  return plot_detail::render(series, title, "mean reward", column,
                             /*identity_line=*/false);
}

inline void plot_to_file(const Table& table, PlotKind kind, const std::string& path,
                         const std::string& column = "") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << plot_svg(table, kind, column);
}

}  // namespace oeb::harness

#endif  // OEB_HARNESS_PLOT_HPP
