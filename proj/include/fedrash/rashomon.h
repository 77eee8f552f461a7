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

#ifndef FEDRASH_RASHOMON_H_
#define FEDRASH_RASHOMON_H_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/prediction.h"
#include "json.hpp"

namespace fedrash {

enum class PerformanceMetric { kAccuracy };

struct PerformanceConstraint {
  PerformanceMetric metric = PerformanceMetric::kAccuracy;
  double epsilon = 0.0;
};

enum class DefinitionKind { kGlobal, kTAgreement, kIndividual };

struct RashomonDefinition {
  DefinitionKind kind = DefinitionKind::kGlobal;
  double t = 0.0;      // kTAgreement only, as a fraction of evaluation clients.
  int client_id = -1;  // kIndividual only.

  std::string Label() const;
};

// How per-client gaps are combined for the global definition.
enum class Aggregation { kWeightedMean, kMean };

struct RashomonSelection {
  RashomonDefinition definition;
  std::vector<PerformanceConstraint> constraints;
  std::vector<bool> members;  // Indexed by pool position.
  size_t baseline_index = 0;
  // Clients whose evaluations decided membership, in tensor order.
  std::vector<int> client_ids;
  // pass[candidate][k]: all constraints hold on client_ids[k].
  std::vector<std::vector<bool>> pass;

  size_t size() const;
  bool empty() const { return size() == 0; }
  std::vector<size_t> MemberIndices() const;
  nlohmann::json ToJson(bool include_pass_matrix = false) const;
  static absl::StatusOr<RashomonSelection> FromJson(const nlohmann::json& doc);
};

using ConstraintOverrides = std::map<int, std::vector<PerformanceConstraint>>;

// Gap between candidates a and b on one client for `metric` (absolute
// accuracy difference).
double PerformanceGap(const PredictionTensor& tensor, size_t client_idx,
                      PerformanceMetric metric, size_t a, size_t b);

// Candidate with the highest test-size weighted accuracy over `eval_clients`
// (total correct / total samples); ties go to the lowest pool index.
absl::StatusOr<size_t> SelectBaseline(const PredictionTensor& tensor,
                                      std::span<const int> eval_clients);

// Members j with f_a(gap_c(baseline, j) over eval clients) <= epsilon for
// every constraint.
absl::StatusOr<RashomonSelection> BuildGlobal(
    const PredictionTensor& tensor, std::span<const int> eval_clients,
    const std::vector<PerformanceConstraint>& constraints, size_t baseline,
    Aggregation aggregation = Aggregation::kWeightedMean);

// Number of evaluation clients that must agree: ceil(t * n_eval).
size_t RequiredAgreementCount(double t, size_t n_eval);

// Members j that satisfy every constraint on at least ceil(t * |eval|)
// clients individually.
absl::StatusOr<RashomonSelection> BuildTAgreement(
    const PredictionTensor& tensor, std::span<const int> eval_clients,
    const std::vector<PerformanceConstraint>& constraints, size_t baseline, double t);

// Membership decided on `client_id`'s data alone. When `overrides` holds an
// entry for the client, those constraints replace the shared ones.
absl::StatusOr<RashomonSelection> BuildIndividual(
    const PredictionTensor& tensor, int client_id,
    const std::vector<PerformanceConstraint>& constraints, size_t baseline,
    const ConstraintOverrides& overrides = {});

// Empirical Rashomon ratio: |members| / pool_size.
double RashomonRatio(const RashomonSelection& selection, size_t pool_size);

}  // namespace fedrash

#endif  // FEDRASH_RASHOMON_H_
