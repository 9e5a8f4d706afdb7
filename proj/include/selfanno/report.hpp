// Copyright (c) 2026, The selfanno Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "selfanno/errors.hpp"

namespace selfanno {

struct MetricsRow {
  int iteration = 0;
  std::optional<double> ap75, ar75;
  std::optional<std::size_t> n_detected, n_gt;
  std::size_t promoted = 0;
  std::int64_t wall_ms = 0;
};

inline std::vector<MetricsRow> parse_metrics_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("iteration,ap75,ar75", 0) != 0)
    throw MissingMetricsError("metrics.csv has no header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw ParseError("metrics.csv row has " + std::to_string(f.size()) + " fields");
    try {
      MetricsRow r;
      r.iteration = std::stoi(f[0]);
      if (!f[1].empty()) r.ap75 = std::stod(f[1]);
      if (!f[2].empty()) r.ar75 = std::stod(f[2]);
      if (!f[3].empty()) r.n_detected = std::stoull(f[3]);
      if (!f[4].empty()) r.n_gt = std::stoull(f[4]);
      r.promoted = std::stoull(f[5]);
      r.wall_ms = std::stoll(f[6]);
      rows.push_back(r);
    } catch (const std::logic_error &) {
      throw ParseError("metrics.csv row is not numeric: " + line);
    }
  }
  return rows;
}

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Panel {
  double left, top, width, height;
  double x_max, y_max;
  double x(double it) const { return left + (x_max > 0 ? it / x_max : 0.5) * width; }
  double y(double v) const { return top + height - (y_max > 0 ? v / y_max : 0) * height; }
};

inline void axes(std::string &svg, const Panel &p, const std::string &y_label, int y_ticks, double y_step) {
  svg += "<rect x=\"" + num(p.left) + "\" y=\"" + num(p.top) + "\" width=\"" + num(p.width) + "\" height=\"" +
         num(p.height) + "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= y_ticks; ++t) {
    const double v = t * y_step;
    svg += "<line x1=\"" + num(p.left - 4) + "\" y1=\"" + num(p.y(v)) + "\" x2=\"" + num(p.left) + "\" y2=\"" +
           num(p.y(v)) + "\" stroke=\"#444\"/>";
    svg += "<text x=\"" + num(p.left - 8) + "\" y=\"" + num(p.y(v) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
           num(v).substr(0, num(v).find('.')) + "</text>\n";
  }
  const int step = std::max(1, static_cast<int>(std::ceil(p.x_max / 10.0)));
  for (int it = 0; it <= static_cast<int>(p.x_max); it += step) {
    svg += "<line x1=\"" + num(p.x(it)) + "\" y1=\"" + num(p.top + p.height) + "\" x2=\"" + num(p.x(it)) + "\" y2=\"" +
           num(p.top + p.height + 4) + "\" stroke=\"#444\"/>";
    svg += "<text x=\"" + num(p.x(it)) + "\" y=\"" + num(p.top + p.height + 16) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + std::to_string(it) + "</text>\n";
  }
  svg += "<text x=\"" + num(p.left - 42) + "\" y=\"" + num(p.top + p.height / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 " + num(p.left - 42) + " " +
         num(p.top + p.height / 2) + ")\">" + y_label + "</text>\n";
}

inline void series(std::string &svg, const Panel &p, const std::vector<std::pair<double, double>> &pts,
                   const std::string &id, const std::string &color, const std::string &dash) {
  if (pts.empty()) return;
  std::string path;
  for (const auto &[x, y] : pts) path += (path.empty() ? "" : " ") + num(p.x(x)) + "," + num(p.y(y));
  svg += "<polyline id=\"" + id + "\" points=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"" +
         (dash.empty() ? std::string() : " stroke-dasharray=\"" + dash + "\"") + "/>\n";
  for (const auto &[x, y] : pts)
    svg += "<circle cx=\"" + num(p.x(x)) + "\" cy=\"" + num(p.y(y)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
}

}  // namespace svg_detail

/// Two stacked panels: AP75/AR75 in percent, then detected instances against
/// a dashed ground-truth line. Pure function of the rows.
inline std::string render_report_svg(const std::vector<MetricsRow> &rows) {
  using namespace svg_detail;
  std::vector<std::pair<double, double>> ap, ar, count;
  std::optional<std::size_t> n_gt;
  int max_it = 0;
  double max_count = 0;
  for (const auto &r : rows) {
    max_it = std::max(max_it, r.iteration);
    if (r.ap75) ap.emplace_back(r.iteration, 100.0 * *r.ap75);
    if (r.ar75) ar.emplace_back(r.iteration, 100.0 * *r.ar75);
    if (r.n_detected) {
      count.emplace_back(r.iteration, static_cast<double>(*r.n_detected));
      max_count = std::max(max_count, static_cast<double>(*r.n_detected));
    }
    if (r.n_gt) n_gt = r.n_gt;
  }
  if (ap.empty() || !n_gt) throw MissingMetricsError("metrics.csv holds no evaluated iteration");
  max_count = std::max(max_count, static_cast<double>(*n_gt));
  const double count_step = std::max(1.0, std::ceil(max_count * 1.1 / 5.0));

  const Panel top{70, 40, 540, 200, static_cast<double>(max_it), 100};
  const Panel bottom{70, 320, 540, 200, static_cast<double>(max_it), count_step * 5};
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"580\" viewBox=\"0 0 640 580\">\n"
      "<rect width=\"640\" height=\"580\" fill=\"white\"/>\n";
  svg += "<text x=\"340\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">AP75 / AR75 per iteration</text>\n";
  axes(svg, top, "score [%]", 5, 20);
  series(svg, top, ap, "ap75", "#1f77b4", "");
  series(svg, top, ar, "ar75", "#d62728", "6,3");
  svg += "<text x=\"520\" y=\"58\" font-size=\"11\" fill=\"#1f77b4\">AP75</text>"
         "<text x=\"560\" y=\"58\" font-size=\"11\" fill=\"#d62728\">AR75</text>\n";
  svg += "<text x=\"340\" y=\"304\" text-anchor=\"middle\" font-size=\"14\">Detected instances per iteration</text>\n";
  axes(svg, bottom, "instances", 5, count_step);
  const double gy = bottom.y(static_cast<double>(*n_gt));
  svg += "<line id=\"gt-line\" x1=\"" + num(bottom.left) + "\" y1=\"" + num(gy) + "\" x2=\"" +
         num(bottom.left + bottom.width) + "\" y2=\"" + num(gy) +
         "\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"8,4\"/>\n";
  series(svg, bottom, count, "detected", "#2ca02c", "");
  svg += "<text x=\"340\" y=\"560\" text-anchor=\"middle\" font-size=\"12\">iteration</text>\n</svg>\n";
  return svg;
}

inline std::string render_summary(const std::vector<MetricsRow> &rows) {
  const MetricsRow *best = nullptr;
  for (const auto &r : rows)
    if (r.ap75 && (!best || *r.ap75 > *best->ap75)) best = &r;
  if (!best) throw MissingMetricsError("metrics.csv holds no evaluated iteration");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "iterations: %zu\nbest iteration: %d\nAP75: %.1f %%\nAR75: %.1f %%\ndetected instances: %zu\n"
                "ground truth instances: %zu\n",
                rows.size(), best->iteration, 100.0 * *best->ap75, 100.0 * best->ar75.value_or(0.0),
                best->n_detected.value_or(0), best->n_gt.value_or(0));
  return buf;
}

/// Reads run_dir/metrics.csv and writes report.svg and summary.txt next to it.
inline void render_report(const std::filesystem::path &run_dir) {
  const auto csv = run_dir / "metrics.csv";
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw MissingMetricsError("no metrics.csv in " + run_dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = parse_metrics_csv(ss.str());
  if (rows.empty()) throw MissingMetricsError("metrics.csv has no rows");
  const auto svg = render_report_svg(rows);
  const auto summary = render_summary(rows);
  for (const auto &[name, text] : {std::pair{"report.svg", svg}, std::pair{"summary.txt", summary}}) {
    std::ofstream out(run_dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (run_dir / name).string());
    out << text;
  }
}

}  // namespace selfanno
