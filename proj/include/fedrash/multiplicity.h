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

#ifndef FEDRASH_MULTIPLICITY_H_
#define FEDRASH_MULTIPLICITY_H_

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/model.h"
#include "fedrash/prediction.h"
#include "fedrash/rashomon.h"

namespace fedrash {

// ---------------------------------------------------------------------------
// Decision-based metrics.

// A client-local metric value and the number of samples it was computed on.
struct LocalValue {
  double value = 0.0;
  size_t n = 0;
};

// Fraction of the client's test samples on which some member's decision
// differs from the baseline's.
absl::StatusOr<double> AmbiguityLocal(const PredictionTensor& tensor, int client_id,
                                      const RashomonSelection& selection);

// sum_c (n_c / n) * ambiguity_c. Equal to the ambiguity of the pooled data.
double AmbiguityGlobal(std::span<const LocalValue> locals);

// Largest fraction of the client's decisions that any single member flips
// relative to the baseline.
absl::StatusOr<double> DiscrepancyLocal(const PredictionTensor& tensor, int client_id,
                                        const RashomonSelection& selection);

// max_c (n_c / n) * discrepancy_c. Never exceeds the pooled discrepancy.
double DiscrepancyFederated(std::span<const LocalValue> locals);

// Trusted-server values computed over the concatenated test rows of `clients`.
absl::StatusOr<double> PooledAmbiguity(const PredictionTensor& tensor,
                                       std::span<const int> clients,
                                       const RashomonSelection& selection);
absl::StatusOr<double> PooledDiscrepancy(const PredictionTensor& tensor,
                                         std::span<const int> clients,
                                         const RashomonSelection& selection);

// 4 (k/m)(1 - k/m) evaluated as 4k(m-k)/m^2: twice the probability that two
// members drawn independently and uniformly (with replacement) disagree.
double DisagreementFromCounts(size_t k, size_t m);

// Disagreement of one sample: k counts members whose class-1 score exceeds
// tau. Binary tasks only.
absl::StatusOr<double> Disagreement(const PredictionTensor& tensor, int client_id,
                                    size_t sample, const RashomonSelection& selection,
                                    double tau);

// ---------------------------------------------------------------------------
// Score-based metrics.

struct CapacityOptions {
  double tolerance = 1e-9;  // Bits.
  int max_iters = 10000;
};

struct CapacityResult {
  double bits = 0.0;  // Certified lower end of the final bracket.
  double lower_bits = 0.0;
  double upper_bits = 0.0;
  int iterations = 0;
};

// Capacity, in bits, of the channel whose input letters are the rows of
// `rows` (one probability vector per Rashomon set member) and whose output
// alphabet is the classes. Computed by Blahut-Arimoto iteration until the
// standard bracket max_x D(W_x || q) - log sum_x p_x exp D(W_x || q) is
// below the tolerance. Rows are clipped at 1e-12 and renormalised first.
//
// A row that is a mixture of other rows never changes the capacity, so
// duplicate rows are dropped and, for two classes, only the rows with the
// smallest and largest class-1 score are kept.
// The multiplicative update p <- p exp(step * D) takes step = 1 (the classic
// iteration) unless a larger step increases the mutual information, in which
// case the step grows; the bracket is valid for any p, so the stopping rule
// is unaffected by the step size.
absl::StatusOr<CapacityResult> RashomonCapacity(const Matrix& rows,
                                                const CapacityOptions& options = {});

// max - min over members.
double Vpr(std::span<const double> scores);
// Population standard deviation over members (uniform weight per member).
double ScoreStd(std::span<const double> scores);

// Member-by-class score matrices. Binary tasks use the class-1 column;
// multi-class tasks take the largest per-class value.
double VprOfRows(const Matrix& member_scores);
double ScoreStdOfRows(const Matrix& member_scores);

// Scores of the selection's members for one sample, one row per member.
Matrix MemberScores(const PredictionTensor& tensor, size_t client_idx,
                    size_t sample, std::span<const size_t> members);

enum class SampleMetric { kRc, kVpr, kStd, kDisagreement };

std::string SampleMetricName(SampleMetric metric);

struct SampleMetricOptions {
  double tau = 0.5;
  CapacityOptions capacity;
};

// Values of `metric` for every test sample of `client_id`.
absl::StatusOr<std::vector<double>> PerSampleMetric(
    const PredictionTensor& tensor, int client_id, const RashomonSelection& selection,
    SampleMetric metric, const SampleMetricOptions& options = {});

struct PerSampleScores {
  SampleMetric metric = SampleMetric::kVpr;
  std::map<int, std::vector<double>> per_client;

  // Values of all clients concatenated in client-id order.
  std::vector<double> Pooled() const;
};

struct PercentileRow {
  double percentile = 0.0;
  double value = 0.0;
};

// Nearest-rank percentiles: the value at rank ceil(p/100 * N) of the sorted
// values (rank 1 for p = 0).
absl::StatusOr<std::vector<PercentileRow>> PercentileSummary(
    std::span<const double> values, std::span<const double> percentiles);

}  // namespace fedrash

#endif  // FEDRASH_MULTIPLICITY_H_
