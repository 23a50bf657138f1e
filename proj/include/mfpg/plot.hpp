// Copyright 2026 The mfpg Authors
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

// Minimal SVG line charts for gap-versus-iteration curves. Output is plain
// text so it needs no plotting stack.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mfpg/error.hpp"

namespace mfpg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  std::vector<Series> series;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct LineStyle {
  const char* color;
  const char* dash;
};

inline LineStyle line_style(std::size_t i) {
  static constexpr LineStyle kStyles[] = {
      {"#1f77b4", ""},          {"#d62728", "6,3"},      {"#2ca02c", "2,2"},
      {"#9467bd", "8,3,2,3"},   {"#ff7f0e", "4,4"},      {"#8c564b", "1,3"},
  };
  return kStyles[i % (sizeof kStyles / sizeof kStyles[0])];
}

// One panel at (ox, oy) of size (w, h).
inline void render_panel(std::ostringstream& os, const Panel& p, double ox, double oy, double w, double h) {
  constexpr double kLeft = 70, kRight = 130, kTop = 20, kBottom = 45;
  const double pw = w - kLeft - kRight, ph = h - kTop - kBottom;
  const double x0 = ox + kLeft, y0 = oy + kTop;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : p.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i]) || (p.log_y && s.y[i] <= 0.0)) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) {
    xmin = 0, xmax = 1, ymin = p.log_y ? 1e-3 : 0.0, ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  auto ty = [&](double v) { return p.log_y ? std::log10(v) : v; };
  double lo = ty(ymin), hi = ty(ymax);
  if (p.log_y) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
  }
  if (hi == lo) hi = lo + 1;
  auto px = [&](double v) { return x0 + (v - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return y0 + ph - (ty(v) - lo) / (hi - lo) * ph; };

  os << "<rect x=\"" << svg_num(x0) << "\" y=\"" << svg_num(y0) << "\" width=\"" << svg_num(pw) << "\" height=\""
     << svg_num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

  // y ticks: decades on a log axis, five divisions otherwise
  const int ny = p.log_y ? static_cast<int>(hi - lo) : 5;
  for (int i = 0; i <= ny; ++i) {
    const double t = lo + (hi - lo) * i / ny;
    const double yy = y0 + ph - (t - lo) / (hi - lo) * ph;
    const std::string label = p.log_y ? "1e" + tick_label(t) : tick_label(t);
    os << "<line x1=\"" << svg_num(x0 - 4) << "\" y1=\"" << svg_num(yy) << "\" x2=\"" << svg_num(x0) << "\" y2=\""
       << svg_num(yy) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_num(x0 - 6) << "\" y=\"" << svg_num(yy + 4)
       << "\" font-size=\"11\" text-anchor=\"end\">" << label << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double t = xmin + (xmax - xmin) * i / 5;
    const double xx = px(t);
    os << "<line x1=\"" << svg_num(xx) << "\" y1=\"" << svg_num(y0 + ph) << "\" x2=\"" << svg_num(xx) << "\" y2=\""
       << svg_num(y0 + ph + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << svg_num(xx) << "\" y=\"" << svg_num(y0 + ph + 17)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(std::round(t * 100) / 100) << "</text>\n";
  }
  os << "<text x=\"" << svg_num(x0 + pw / 2) << "\" y=\"" << svg_num(y0 + ph + 36)
     << "\" font-size=\"13\" text-anchor=\"middle\">" << svg_escape(p.x_label) << "</text>\n";
  os << "<text transform=\"translate(" << svg_num(ox + 16) << "," << svg_num(y0 + ph / 2)
     << ") rotate(-90)\" font-size=\"13\" text-anchor=\"middle\">" << svg_escape(p.y_label) << "</text>\n";

  for (std::size_t si = 0; si < p.series.size(); ++si) {
    const auto& s = p.series[si];
    const auto style = line_style(si);
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.y[i]) || (p.log_y && s.y[i] <= 0.0)) continue;
      pts += svg_num(px(s.x[i])) + "," + svg_num(py(s.y[i])) + " ";
    }
    os << "<polyline class=\"series\" data-name=\"" << svg_escape(s.name) << "\" fill=\"none\" stroke=\""
       << style.color << "\" stroke-width=\"1.8\"";
    if (*style.dash) os << " stroke-dasharray=\"" << style.dash << "\"";
    os << " points=\"" << pts << "\"/>\n";

    const double ly = y0 + 14 + 18.0 * static_cast<double>(si);
    os << "<line x1=\"" << svg_num(x0 + pw + 10) << "\" y1=\"" << svg_num(ly) << "\" x2=\"" << svg_num(x0 + pw + 34)
       << "\" y2=\"" << svg_num(ly) << "\" stroke=\"" << style.color << "\" stroke-width=\"1.8\"";
    if (*style.dash) os << " stroke-dasharray=\"" << style.dash << "\"";
    os << "/>\n<text x=\"" << svg_num(x0 + pw + 38) << "\" y=\"" << svg_num(ly + 4) << "\" font-size=\"11\">"
       << svg_escape(s.name) << "</text>\n";
  }
}

}  // namespace detail

/// Stacks the panels vertically into one SVG document.
inline std::string render_svg(const std::vector<Panel>& panels, double width = 640, double panel_height = 320) {
  if (panels.empty()) throw ArgumentError("render_svg: nothing to draw");
  std::ostringstream os;
  const double height = panel_height * static_cast<double>(panels.size());
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i) {
    detail::render_panel(os, panels[i], 0, panel_height * static_cast<double>(i), width, panel_height);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mfpg
