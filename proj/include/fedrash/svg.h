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

#ifndef FEDRASH_SVG_H_
#define FEDRASH_SVG_H_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"

namespace fedrash {

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<ChartSeries> series;
  bool scatter = false;  // Markers only; otherwise polylines with markers.
};

// Static SVG rendering with linear axes fitted to the data.
std::string RenderSvg(const Chart& chart);

// The plotted values, one row per point: series, x, y.
std::string ChartCsv(const Chart& chart);

// Writes <stem>.svg and its sibling <stem>.csv.
absl::Status WriteChart(const Chart& chart, const std::filesystem::path& stem);

}  // namespace fedrash

#endif  // FEDRASH_SVG_H_
