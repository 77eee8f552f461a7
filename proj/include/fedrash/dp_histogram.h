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

#ifndef FEDRASH_DP_HISTOGRAM_H_
#define FEDRASH_DP_HISTOGRAM_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedrash/rng.h"
#include "json.hpp"

namespace fedrash {

// Equal-width buckets over [lower, upper]. Bucket i covers
// [lower + i*w, lower + (i+1)*w); the final bucket also includes `upper`.
struct BucketSpec {
  double lower = 0.0;
  double upper = 1.0;
  int n_buckets = 1000;

  absl::Status Validate() const;
  double width() const { return (upper - lower) / n_buckets; }
  int BucketOf(double value) const;  // Clamps to [0, n_buckets - 1].
  double UpperEdge(int bucket) const;

  friend bool operator==(const BucketSpec&, const BucketSpec&) = default;
  nlohmann::json ToJson() const;
  static absl::StatusOr<BucketSpec> FromJson(const nlohmann::json& j);
};

struct BinResult {
  std::vector<int64_t> counts;
  size_t clamped = 0;  // Values outside [lower, upper] moved to an end bucket.
};

absl::StatusOr<BinResult> BinValues(std::span<const double> values,
                                    const BucketSpec& spec);

// The message a client sends to the server. `epsilon` is empty when noise
// is disabled (trusted evaluation of the histogram path).
struct NoisyHistogram {
  BucketSpec spec;
  std::vector<int64_t> counts;
  std::optional<double> epsilon;
  int client_id = 0;

  nlohmann::json ToJson() const;
  static absl::StatusOr<NoisyHistogram> FromJson(const nlohmann::json& j);
};

// P(Z = k) = (1 - a) / (1 + a) * a^|k| with a = exp(-epsilon).
double TwoSidedGeometricPmf(int64_t k, double epsilon);

// Difference of two iid geometric variables on {0, 1, ...}.
int64_t SampleTwoSidedGeometric(CounterRng& rng, double epsilon);

// Adds independent two-sided geometric noise to every bucket and truncates
// to [0, cap]. Without a seed the noise is drawn from OS entropy.
absl::StatusOr<NoisyHistogram> Privatize(std::span<const int64_t> counts,
                                         const BucketSpec& spec, double epsilon,
                                         int64_t cap, std::optional<uint64_t> seed,
                                         int client_id = 0);

// Wraps exact counts without noise.
absl::StatusOr<NoisyHistogram> ExactHistogram(std::span<const int64_t> counts,
                                              const BucketSpec& spec,
                                              int client_id = 0);

struct AggregatedCdf {
  BucketSpec spec;
  std::vector<int64_t> cumulative;  // Prefix sums of the summed counts.
  std::vector<double> cdf;          // cumulative / total; all zero when empty.
  int64_t total = 0;
  bool empty = false;
};

absl::StatusOr<AggregatedCdf> Aggregate(std::span<const NoisyHistogram> histograms);

// Upper edge of the first bucket whose CDF reaches q, for q in (0, 1].
absl::StatusOr<double> DpQuantile(const AggregatedCdf& cdf, double q);

// max_i |a.cdf[i] - b.cdf[i]|.
absl::StatusOr<double> CdfSupDistance(const AggregatedCdf& a, const AggregatedCdf& b);

}  // namespace fedrash

#endif  // FEDRASH_DP_HISTOGRAM_H_
