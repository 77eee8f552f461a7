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

#ifndef FEDRASH_FAIRNESS_H_
#define FEDRASH_FAIRNESS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/prediction.h"
#include "fedrash/rashomon.h"

namespace fedrash {

enum class GapStatus { kOk, kUndefined };

// |P(Y_hat = 1 | Z = 1) - P(Y_hat = 1 | Z = 0)|. The gap is undefined, and
// reported as such, when either group is empty.
struct ParityGap {
  double gap = 0.0;
  GapStatus status = GapStatus::kOk;
};

absl::StatusOr<ParityGap> DemographicParityGap(std::span<const int> decisions,
                                               std::span<const int> sensitive);

struct FairnessRow {
  std::string client;  // Client id, or "global" for the pooled rows.
  size_t candidate = 0;
  double accuracy = 0.0;
  ParityGap dp_gap;
};

struct FairnessReport {
  std::vector<size_t> sampled;  // Pool indices, ascending.
  std::vector<FairnessRow> rows;

  // Columns client, candidate, accuracy, dp_gap, status.
  std::string ToCsv() const;
};

// Samples min(sample_k, |members|) members without replacement and reports
// accuracy and parity gap on every client that carries a sensitive
// attribute, followed by one pooled "global" row per sampled member.
absl::StatusOr<FairnessReport> FairnessSweep(const PredictionTensor& tensor,
                                             const RashomonSelection& selection,
                                             size_t sample_k, uint64_t seed);

// Index of the smallest epsilon (grid assumed ascending, selections
// parallel to it) whose selection holds at least `sample_k` members.
std::optional<size_t> SmallestSufficientEpsilon(
    std::span<const RashomonSelection> selections, size_t sample_k);

}  // namespace fedrash

#endif  // FEDRASH_FAIRNESS_H_
