// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Report emitters: convergence and metrics CSV files, a convergence-curve
// SVG, and an IoU-matrix heatmap SVG. Everything is emitted from scratch
// with fixed formatting so identical inputs always produce identical bytes.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaug/ada.hpp"
#include "adaug/fs.hpp"
#include "adaug/metrics.hpp"

namespace adaug {

constexpr const char* kConvergenceCsvHeader = "epoch,phase,cycle,loss,dsc,hsd,tpr,tnr,ppv";
constexpr const char* kEvalCsvHeader =
    "dataset,model,method,dsc,hsd,tpr,tnr,ppv,hsd_undefined_count";

namespace detail {

inline std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::string convergence_csv_row(const ConvergenceRecord& r) {
  using detail::csv_num;
  return std::to_string(r.epoch) + "," + r.phase + "," + std::to_string(r.cycle) +
         "," + csv_num(r.loss) + "," + csv_num(r.val.dsc) + "," + csv_num(r.val.hsd) +
         "," + csv_num(r.val.tpr) + "," + csv_num(r.val.tnr) + "," + csv_num(r.val.ppv);
}

inline std::string convergence_csv(const std::vector<ConvergenceRecord>& records) {
  std::string out = std::string(kConvergenceCsvHeader) + "\n";
  for (const ConvergenceRecord& r : records) out += convergence_csv_row(r) + "\n";
  return out;
}

// Parses a convergence CSV back into records (metrics' sample counts are not
// stored in the file and stay zero).
inline std::vector<ConvergenceRecord> parse_convergence_csv(const std::string& text) {
  std::vector<ConvergenceRecord> out;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != kConvergenceCsvHeader)
        throw std::runtime_error("convergence csv: unexpected header '" + line + "'");
      continue;
    }
    std::vector<std::string> cells;
    std::size_t a = 0;
    while (true) {
      const std::size_t comma = line.find(',', a);
      cells.push_back(line.substr(a, comma == std::string::npos ? comma : comma - a));
      if (comma == std::string::npos) break;
      a = comma + 1;
    }
    if (cells.size() != 9)
      throw std::runtime_error("convergence csv line " + std::to_string(lineno) +
                               ": expected 9 cells, got " + std::to_string(cells.size()));
    ConvergenceRecord r;
    r.epoch = std::stoi(cells[0]);
    r.phase = cells[1];
    r.cycle = std::stoi(cells[2]);
    r.loss = std::stod(cells[3]);
    r.val.dsc = std::stod(cells[4]);
    r.val.hsd = std::stod(cells[5]);
    r.val.tpr = std::stod(cells[6]);
    r.val.tnr = std::stod(cells[7]);
    r.val.ppv = std::stod(cells[8]);
    out.push_back(r);
  }
  return out;
}

struct EvalCsvRow {
  std::string dataset;
  std::string model;
  std::string method;
  MetricsReport report;
};

inline std::string eval_csv_row(const EvalCsvRow& r) {
  using detail::csv_num;
  return r.dataset + "," + r.model + "," + r.method + "," + csv_num(r.report.dsc) +
         "," + csv_num(r.report.hsd) + "," + csv_num(r.report.tpr) + "," +
         csv_num(r.report.tnr) + "," + csv_num(r.report.ppv) + "," +
         std::to_string(r.report.hsd_undefined_count);
}

// Appends one row, creating the file with its header on first use. The whole
// file is rewritten through the atomic path so a crash never leaves a torn
// row behind.
inline void append_eval_csv(const std::string& path, const EvalCsvRow& row) {
  std::string text;
  if (std::filesystem::exists(path)) text = detail::read_file(path);
  if (text.empty()) text = std::string(kEvalCsvHeader) + "\n";
  text += eval_csv_row(row) + "\n";
  detail::write_file_atomic(path, text);
}

// ---------------------------------------------------------------------------
// SVG emitters
// ---------------------------------------------------------------------------

namespace detail {

inline std::string svg_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

constexpr const char* kSeriesColors[8] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace detail

struct PlotSeries {
  std::string label;
  std::vector<std::pair<int, double>> points;  // (epoch, dsc)
};

// DSC-versus-epoch overlay. One polyline per series, fixed 0..100 y-axis,
// optional inset re-plotting the [zoom_lo, zoom_hi] epoch range.
inline std::string svg_convergence_plot(std::vector<PlotSeries> series, int zoom_lo = 0,
                                        int zoom_hi = -1) {
  using detail::svg_coord;
  if (series.empty()) throw std::invalid_argument("plot: no series given");
  int min_epoch = series[0].points.empty() ? 0 : series[0].points[0].first;
  int max_epoch = min_epoch;
  for (PlotSeries& s : series) {
    std::sort(s.points.begin(), s.points.end());
    for (const auto& [e, d] : s.points) {
      min_epoch = std::min(min_epoch, e);
      max_epoch = std::max(max_epoch, e);
    }
  }
  if (max_epoch == min_epoch) max_epoch = min_epoch + 1;

  const double px0 = 60, px1 = 780, py0 = 40, py1 = 460;
  auto sx = [&](double e) {
    return px0 + (e - min_epoch) / static_cast<double>(max_epoch - min_epoch) * (px1 - px0);
  };
  auto sy = [&](double d) { return py1 - d / 100.0 * (py1 - py0); };

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"520\" "
      "viewBox=\"0 0 840 520\">\n";
  svg += "<rect width=\"840\" height=\"520\" fill=\"white\"/>\n";
  // Axes and grid.
  for (int t = 0; t <= 5; ++t) {
    const double yv = t * 20.0;
    const double y = sy(yv);
    svg += "<line x1=\"" + svg_coord(px0) + "\" y1=\"" + svg_coord(y) + "\" x2=\"" +
           svg_coord(px1) + "\" y2=\"" + svg_coord(y) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + svg_coord(px0 - 8) + "\" y=\"" + svg_coord(y + 4) +
           "\" font-size=\"12\" text-anchor=\"end\">" + std::to_string(static_cast<int>(yv)) +
           "</text>\n";
  }
  for (int t = 0; t <= 5; ++t) {
    const double ev = min_epoch + t * (max_epoch - min_epoch) / 5.0;
    const double x = sx(ev);
    svg += "<line x1=\"" + svg_coord(x) + "\" y1=\"" + svg_coord(py1) + "\" x2=\"" +
           svg_coord(x) + "\" y2=\"" + svg_coord(py1 + 5) +
           "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + svg_coord(x) + "\" y=\"" + svg_coord(py1 + 20) +
           "\" font-size=\"12\" text-anchor=\"middle\">" +
           std::to_string(static_cast<int>(std::lround(ev))) + "</text>\n";
  }
  svg += "<line x1=\"" + svg_coord(px0) + "\" y1=\"" + svg_coord(py0) + "\" x2=\"" +
         svg_coord(px0) + "\" y2=\"" + svg_coord(py1) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + svg_coord(px0) + "\" y1=\"" + svg_coord(py1) + "\" x2=\"" +
         svg_coord(px1) + "\" y2=\"" + svg_coord(py1) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"420\" y=\"505\" font-size=\"14\" text-anchor=\"middle\">epoch</text>\n";
  svg += "<text x=\"18\" y=\"250\" font-size=\"14\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 250)\">validation DSC</text>\n";

  auto polyline = [&](const PlotSeries& s, const char* color, const char* cls,
                      auto to_x, auto to_y) {
    std::string pts;
    for (const auto& [e, d] : s.points) {
      if (!pts.empty()) pts += " ";
      pts += svg_coord(to_x(e)) + "," + svg_coord(to_y(d));
    }
    return "<polyline class=\"" + std::string(cls) + "\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  };

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = detail::kSeriesColors[k % 8];
    svg += polyline(series[k], color, "series", sx, sy);
    const double ly = 56 + 18 * static_cast<double>(k);
    svg += "<line x1=\"640\" y1=\"" + svg_coord(ly - 4) + "\" x2=\"668\" y2=\"" +
           svg_coord(ly - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"674\" y=\"" + svg_coord(ly) + "\" font-size=\"12\">" +
           series[k].label + "</text>\n";
  }

  if (zoom_hi >= zoom_lo && zoom_hi > 0) {
    // Inset: re-plot the requested epoch range in a framed box.
    const double ix0 = 420, ix1 = 760, iy0 = 300, iy1 = 440;
    const int zlo = std::max(zoom_lo, min_epoch);
    const int zhi = std::min(zoom_hi, max_epoch);
    const int span = std::max(1, zhi - zlo);
    auto zx = [&](double e) { return ix0 + (e - zlo) / static_cast<double>(span) * (ix1 - ix0); };
    auto zy = [&](double d) { return iy1 - d / 100.0 * (iy1 - iy0); };
    svg += "<rect class=\"zoom\" x=\"" + svg_coord(ix0) + "\" y=\"" + svg_coord(iy0) +
           "\" width=\"" + svg_coord(ix1 - ix0) + "\" height=\"" + svg_coord(iy1 - iy0) +
           "\" fill=\"white\" stroke=\"#888888\" stroke-dasharray=\"4 2\"/>\n";
    svg += "<text x=\"" + svg_coord(ix0 + 4) + "\" y=\"" + svg_coord(iy0 + 14) +
           "\" font-size=\"11\">epochs " + std::to_string(zlo) + "-" +
           std::to_string(zhi) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
      PlotSeries trimmed;
      trimmed.label = series[k].label;
      for (const auto& [e, d] : series[k].points)
        if (e >= zlo && e <= zhi) trimmed.points.push_back({e, d});
      if (trimmed.points.empty()) continue;
      svg += polyline(trimmed, detail::kSeriesColors[k % 8], "zoom-series", zx, zy);
    }
  }
  svg += "</svg>\n";
  return svg;
}

// M x M heatmap with method names on both borders and one labeled cell per
// matrix entry.
inline std::string svg_iou_heatmap(const std::vector<std::string>& names,
                                   const std::vector<std::vector<double>>& matrix) {
  using detail::svg_coord;
  const std::size_t m = names.size();
  if (matrix.size() != m)
    throw std::invalid_argument("heatmap: matrix size does not match name count");
  const double cell = 84, left = 130, top = 90;
  const double width = left + cell * static_cast<double>(m) + 20;
  const double height = top + cell * static_cast<double>(m) + 20;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    svg_coord(width) + "\" height=\"" + svg_coord(height) +
                    "\" viewBox=\"0 0 " + svg_coord(width) + " " + svg_coord(height) +
                    "\">\n<rect width=\"" + svg_coord(width) + "\" height=\"" +
                    svg_coord(height) + "\" fill=\"white\"/>\n";
  for (std::size_t k = 0; k < m; ++k) {
    const double cx = left + cell * (static_cast<double>(k) + 0.5);
    const double ry = top + cell * (static_cast<double>(k) + 0.5);
    svg += "<text x=\"" + svg_coord(cx) + "\" y=\"" + svg_coord(top - 12) +
           "\" font-size=\"12\" text-anchor=\"middle\">" + names[k] + "</text>\n";
    svg += "<text x=\"" + svg_coord(left - 10) + "\" y=\"" + svg_coord(ry + 4) +
           "\" font-size=\"12\" text-anchor=\"end\">" + names[k] + "</text>\n";
  }
  for (std::size_t r = 0; r < m; ++r) {
    if (matrix[r].size() != m)
      throw std::invalid_argument("heatmap: matrix is not square");
    for (std::size_t c = 0; c < m; ++c) {
      const double v = std::clamp(matrix[r][c], 0.0, 1.0);
      // Light-to-dark blue ramp.
      const int red = static_cast<int>(std::lround(247 + v * (8 - 247)));
      const int grn = static_cast<int>(std::lround(251 + v * (48 - 251)));
      const int blu = static_cast<int>(std::lround(255 + v * (107 - 255)));
      char color[8];
      std::snprintf(color, sizeof(color), "#%02x%02x%02x", red, grn, blu);
      const double x = left + cell * static_cast<double>(c);
      const double y = top + cell * static_cast<double>(r);
      svg += "<rect class=\"cell\" x=\"" + svg_coord(x) + "\" y=\"" + svg_coord(y) +
             "\" width=\"" + svg_coord(cell) + "\" height=\"" + svg_coord(cell) +
             "\" fill=\"" + color + "\" stroke=\"white\"/>\n";
      char label[16];
      std::snprintf(label, sizeof(label), "%.3f", matrix[r][c]);
      svg += "<text x=\"" + svg_coord(x + cell / 2) + "\" y=\"" +
             svg_coord(y + cell / 2 + 4) + "\" font-size=\"12\" text-anchor=\"middle\" "
             "fill=\"" + (v > 0.6 ? "white" : "black") + "\">" + label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

// Matrix CSV: header row of method names, then one row per method with its
// name in the first column.
inline std::string iou_matrix_csv(const std::vector<std::string>& names,
                                  const std::vector<std::vector<double>>& matrix) {
  std::string out = "method";
  for (const std::string& n : names) out += "," + n;
  out += "\n";
  for (std::size_t r = 0; r < names.size(); ++r) {
    out += names[r];
    for (std::size_t c = 0; c < names.size(); ++c)
      out += "," + detail::csv_num(matrix[r][c]);
    out += "\n";
  }
  return out;
}

}  // namespace adaug
