// Copyright 2026 The Authors.
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

// Minimal SVG charts. Coordinates are printed with two decimals so output
// is byte-stable; no timestamps are emitted.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xlog/core.hpp"

namespace xlog::svg {

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
inline constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string num(double v) { return format_fixed(v, 2); }

inline const char* color(std::size_t i) { return kPalette[i % kPaletteSize]; }

struct Frame {
  double width = 640, height = 400;
  double left = 70, right = 20, top = 40, bottom = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

namespace detail {

inline void pad_range(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
}

inline std::string open(const Frame& f, const std::string& title, const std::string& comment) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) +
       "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) + "\">\n";
  if (!comment.empty()) s += "<!-- " + comment + " -->\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       escape(title) + "</text>\n";
  return s;
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  s += "<g stroke=\"black\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.height - f.bottom) + "\" x2=\"" + num(f.width - f.right) +
       "\" y2=\"" + num(f.height - f.bottom) + "\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
       num(f.height - f.bottom) + "\"/>\n";
  s += "</g>\n<g font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(f.height - f.bottom + 14) + "\" text-anchor=\"middle\">" +
         format_double(std::round(xv * 1000) / 1000) + "</text>\n";
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(yv) + 3) + "\" text-anchor=\"end\">" +
         format_double(std::round(yv * 1000) / 1000) + "</text>\n";
  }
  s += "<text x=\"" + num((f.left + f.width - f.right) / 2) + "\" y=\"" + num(f.height - 12) +
       "\" text-anchor=\"middle\" font-size=\"12\">" + escape(xlabel) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((f.top + f.height - f.bottom) / 2) + "\" text-anchor=\"middle\" font-size=\"12\" " +
       "transform=\"rotate(-90 16 " + num((f.top + f.height - f.bottom) / 2) + ")\">" + escape(ylabel) + "</text>\n";
  s += "</g>\n";
  return s;
}

inline std::string legend(const Frame& f, const std::vector<std::string>& names) {
  std::string s = "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = f.top + 6 + 16 * static_cast<double>(i);
    s += "<rect x=\"" + num(f.width - f.right - 120) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
         color(i) + "\"/>\n";
    s += "<text x=\"" + num(f.width - f.right - 105) + "\" y=\"" + num(y + 1) + "\">" + escape(names[i]) + "</text>\n";
  }
  return s + "</g>\n";
}

}  // namespace detail

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Non-finite points are skipped (they break the polyline).
inline std::string line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                             const std::string& ylabel, const std::string& comment = "") {
  Frame f;
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  detail::pad_range(xlo, xhi);
  detail::pad_range(ylo, yhi);
  f.x0 = xlo;
  f.x1 = xhi;
  f.y0 = ylo;
  f.y1 = yhi;
  std::string out = detail::open(f, title, comment) + detail::axes(f, xlabel, ylabel);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    names.push_back(s.name);
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!pts.empty()) pts.push_back(' ');
      pts += num(f.px(s.x[i])) + "," + num(f.py(s.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color(k)) + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }
  if (series.size() > 1) out += detail::legend(f, names);
  return out + "</svg>\n";
}

// Horizontal bars, one per label, top to bottom. Negative values extend left
// of the zero line and are drawn in the second palette colour.
inline std::string bar_chart(const std::vector<std::string>& labels, const std::vector<double>& values,
                             const std::string& title, const std::string& comment = "") {
  Frame f;
  f.left = 230;
  f.height = std::max(160.0, 60.0 + 26.0 * static_cast<double>(labels.size()));
  double lo = 0.0, hi = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  detail::pad_range(lo, hi);
  f.x0 = lo;
  f.x1 = hi;
  std::string out = detail::open(f, title, comment);
  const double zero = f.px(0.0);
  out += "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < labels.size() && i < values.size(); ++i) {
    const double y = f.top + 26.0 * static_cast<double>(i);
    const double v = std::isfinite(values[i]) ? values[i] : 0.0;
    const double x = std::min(zero, f.px(v));
    const double w = std::abs(f.px(v) - zero);
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"18\" fill=\"" +
           color(v < 0 ? 1 : 0) + "\"/>\n";
    out += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(y + 13) + "\" text-anchor=\"end\">" + escape(labels[i]) +
           "</text>\n";
    out += "<text x=\"" + num(std::max(zero, f.px(v)) + 4) + "\" y=\"" + num(y + 13) + "\">" + format_fixed(values[i], 3) +
           "</text>\n";
  }
  out += "</g>\n<line x1=\"" + num(zero) + "\" y1=\"" + num(f.top - 4) + "\" x2=\"" + num(zero) + "\" y2=\"" +
         num(f.height - f.bottom + 10) + "\" stroke=\"black\"/>\n";
  return out + "</svg>\n";
}

// Scatter with colour by `color_group` and marker shape by `marker_group`
// (circle, square, triangle, cross, repeating).
inline std::string scatter(const std::vector<double>& x, const std::vector<double>& y, const std::vector<int>& color_group,
                           const std::vector<int>& marker_group, const std::vector<std::string>& group_names,
                           const std::string& title, const std::string& comment = "") {
  Frame f;
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xlo = std::min(xlo, x[i]);
    xhi = std::max(xhi, x[i]);
    ylo = std::min(ylo, y[i]);
    yhi = std::max(yhi, y[i]);
  }
  detail::pad_range(xlo, xhi);
  detail::pad_range(ylo, yhi);
  const double mx = (xhi - xlo) * 0.05, my = (yhi - ylo) * 0.05;
  f.x0 = xlo - mx;
  f.x1 = xhi + mx;
  f.y0 = ylo - my;
  f.y1 = yhi + my;
  std::string out = detail::open(f, title, comment) + detail::axes(f, "latent 1", "latent 2");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cx = f.px(x[i]), cy = f.py(y[i]);
    const std::string fill = color(static_cast<std::size_t>(std::max(0, color_group[i])));
    switch (marker_group[i] % 4) {
      case 0:
        out += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"3.5\" fill=\"" + fill + "\"/>\n";
        break;
      case 1:
        out += "<rect x=\"" + num(cx - 3.5) + "\" y=\"" + num(cy - 3.5) + "\" width=\"7\" height=\"7\" fill=\"" + fill + "\"/>\n";
        break;
      case 2:
        out += "<polygon points=\"" + num(cx) + "," + num(cy - 4) + " " + num(cx - 4) + "," + num(cy + 3.5) + " " +
               num(cx + 4) + "," + num(cy + 3.5) + "\" fill=\"" + fill + "\"/>\n";
        break;
      default:
        out += "<path d=\"M" + num(cx - 4) + " " + num(cy - 4) + "L" + num(cx + 4) + " " + num(cy + 4) + "M" +
               num(cx - 4) + " " + num(cy + 4) + "L" + num(cx + 4) + " " + num(cy - 4) + "\" stroke=\"" + fill +
               "\" stroke-width=\"2\"/>\n";
    }
  }
  if (!group_names.empty()) out += detail::legend(f, group_names);
  return out + "</svg>\n";
}

}  // namespace xlog::svg
