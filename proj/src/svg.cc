/*
 * Copyright 2026 The Fedrash Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fedrash/svg.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/str_format.h"
#include "fedrash/csv.h"
#include "fedrash/file_util.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 440;
constexpr double kLeft = 70;
constexpr double kRight = 190;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                    "#bcbd22", "#17becf"};

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void Add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void Finalize() {
    if (!std::isfinite(lo)) {
      lo = 0;
      hi = 1;
    }
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.05, 0.05);
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string RenderSvg(const Chart& chart) {
  Range xr;
  Range yr;
  for (const ChartSeries& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      xr.Add(x);
      yr.Add(y);
    }
  }
  xr.Finalize();
  yr.Finalize();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string out = absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n",
      kWidth, kHeight);
  out += absl::StrFormat("<rect width=\"%.0f\" height=\"%.0f\" fill=\"white\"/>\n", kWidth,
                         kHeight);
  out += absl::StrFormat(
      "<text x=\"%.1f\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n",
      kLeft + pw / 2, Escape(chart.title));
  out += absl::StrFormat(
      "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
      "stroke=\"black\"/>\n",
      kLeft, kTop, pw, ph);
  for (int i = 0; i <= 5; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    out += absl::StrFormat(
        "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", px(fx),
        kTop, px(fx), kTop + ph);
    out += absl::StrFormat(
        "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n", kLeft,
        py(fy), kLeft + pw, py(fy));
    out += absl::StrFormat(
        "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.4g</text>\n", px(fx),
        kTop + ph + 16, fx);
    out += absl::StrFormat("<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.4g</text>\n",
                           kLeft - 6, py(fy) + 4, fy);
  }
  out += absl::StrFormat(
      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", kLeft + pw / 2,
      kHeight - 18, Escape(chart.x_label));
  out += absl::StrFormat(
      "<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.1f)\">"
      "%s</text>\n",
      kTop + ph / 2, kTop + ph / 2, Escape(chart.y_label));

  for (size_t i = 0; i < chart.series.size(); ++i) {
    const ChartSeries& s = chart.series[i];
    const char* color = kPalette[i % std::size(kPalette)];
    if (!chart.scatter && s.points.size() > 1) {
      std::string pts;
      for (const auto& [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y)) continue;
        pts += absl::StrFormat("%.2f,%.2f ", px(x), py(y));
      }
      if (!pts.empty()) pts.pop_back();
      out += absl::StrFormat(
          "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" points=\"%s\"/>\n",
          color, pts);
    }
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      out += absl::StrFormat("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%s\" fill=\"%s\"/>\n", px(x),
                             py(y), chart.scatter ? "3" : "2", color);
    }
    const double ly = kTop + 10 + 16.0 * static_cast<double>(i);
    out += absl::StrFormat(
        "<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>\n",
        kLeft + pw + 12, ly - 9, color);
    out += absl::StrFormat("<text x=\"%.1f\" y=\"%.1f\">%s</text>\n", kLeft + pw + 28, ly,
                           Escape(s.name));
  }
  out += "</svg>\n";
  return out;
}

std::string ChartCsv(const Chart& chart) {
  std::string out = FormatCsvRow({"series", "x", "y"});
  for (const ChartSeries& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      out += FormatCsvRow({s.name, FormatDouble(x), FormatDouble(y)});
    }
  }
  return out;
}

absl::Status WriteChart(const Chart& chart, const std::filesystem::path& stem) {
  std::filesystem::path svg = stem;
  svg += ".svg";
  std::filesystem::path csv = stem;
  csv += ".csv";
  FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(svg, RenderSvg(chart)));
  return WriteFileAtomic(csv, ChartCsv(chart));
}

}  // namespace fedrash
