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

#ifndef FEDRASH_CONFIG_H_
#define FEDRASH_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/data.h"
#include "fedrash/federation.h"
#include "fedrash/multiplicity.h"
#include "fedrash/rashomon.h"
#include "json.hpp"

namespace fedrash {

struct DataSection {
  std::string source = "synthetic";  // "synthetic" or "csv".
  // Synthetic source.
  int n_samples = 4000;
  int d_in = 5;
  int d_out = 2;
  double separation = 1.5;
  std::optional<double> sensitive_bias = 0.2;  // Empty: no sensitive attribute.
  // CSV source. Relative paths resolve against the config file's directory.
  std::string csv_path;
  std::string schema_path;
  std::string label_column = "label";
  std::optional<std::string> sensitive_column;
  // Partition.
  int n_clients = 20;
  double alpha = 0.5;
  SplitFractions splits;
  int max_retries = 10000;
};

struct PoolSection {
  int n_seeds = 25;
  std::vector<double> participation_ratios = {0.5, 1.0};
  std::vector<int> local_epochs = {1, 2};
  FedConfig training;  // seed, participation_ratio and local_epochs unused.
};

struct RashomonSection {
  std::vector<double> epsilons = {0.0,   0.004, 0.008, 0.012, 0.016, 0.020,
                                  0.024, 0.028, 0.032, 0.036, 0.040};
  std::vector<double> t_values = {0.6, 0.75, 0.9};
  std::vector<std::string> definitions = {"global", "t_agreement", "individual"};
  std::vector<int> eval_clients;  // Empty: every client.
  int individual_clients = 10;
  Aggregation aggregation = Aggregation::kWeightedMean;
};

enum class MetricPath { kTrusted, kDp, kBoth };

struct MetricsSection {
  std::vector<std::string> metrics = {"ambiguity",   "discrepancy", "disagreement",
                                      "vpr",         "std",         "rashomon_capacity"};
  MetricPath path = MetricPath::kBoth;
  double dp_epsilon = 0.1;
  int n_buckets = 1000;
  bool dp_deterministic_seed = true;
  std::vector<double> percentiles = {25, 50, 75, 90, 99};
  double tau = 0.5;
  // Also report percentiles of 2^capacity (effective number of classes).
  bool exponentiated_capacity = true;
  CapacityOptions capacity;
};

struct FairnessSection {
  int sample_k = 15;
};

struct ExperimentConfig {
  DataSection data;
  PoolSection pool;
  RashomonSection rashomon;
  MetricsSection metrics;
  std::optional<FairnessSection> fairness;
  std::string output_dir;
  uint64_t seed = 0;
  std::filesystem::path base_dir;  // Directory of the config file.

  // Fully resolved form, with defaults filled in.
  nlohmann::json ToJson() const;
};

// Parses and validates a config document. Errors name the offending field
// as a path such as `rashomon.epsilons[2]` and, when it can be located, the
// line of the document it sits on.
absl::StatusOr<ExperimentConfig> ParseExperimentConfig(
    std::string_view text, const std::filesystem::path& base_dir = ".");
absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::filesystem::path& path);

// Maps every object member and array element of a valid JSON document to the
// 1-based line on which its value starts, keyed by path.
absl::StatusOr<std::map<std::string, int>> IndexJsonLines(std::string_view text);

}  // namespace fedrash

#endif  // FEDRASH_CONFIG_H_
