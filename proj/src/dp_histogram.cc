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

#include "fedrash/dp_histogram.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "absl/strings/str_format.h"
#include "fedrash/status_macros.h"

namespace fedrash {

absl::Status BucketSpec::Validate() const {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("bucket range [%g, %g] must satisfy lower < upper", lower, upper));
  }
  if (n_buckets < 1) {
    return absl::InvalidArgumentError(
        absl::StrFormat("n_buckets must be >= 1, got %d", n_buckets));
  }
  return absl::OkStatus();
}

int BucketSpec::BucketOf(double value) const {
  if (!(value > lower)) return 0;
  if (value >= upper) return n_buckets - 1;
  const int b = static_cast<int>(std::floor((value - lower) / width()));
  return std::clamp(b, 0, n_buckets - 1);
}

double BucketSpec::UpperEdge(int bucket) const {
  if (bucket >= n_buckets - 1) return upper;
  return lower + (bucket + 1) * width();
}

nlohmann::json BucketSpec::ToJson() const {
  return {{"lower", lower}, {"upper", upper}, {"n_buckets", n_buckets}};
}

absl::StatusOr<BucketSpec> BucketSpec::FromJson(const nlohmann::json& j) {
  BucketSpec spec;
  try {
    spec.lower = j.at("lower").get<double>();
    spec.upper = j.at("upper").get<double>();
    spec.n_buckets = j.at("n_buckets").get<int>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrFormat("bad bucket spec: %s", e.what()));
  }
  FEDRASH_RETURN_IF_ERROR(spec.Validate());
  return spec;
}

absl::StatusOr<BinResult> BinValues(std::span<const double> values,
                                    const BucketSpec& spec) {
  FEDRASH_RETURN_IF_ERROR(spec.Validate());
  BinResult out;
  out.counts.assign(spec.n_buckets, 0);
  for (double v : values) {
    if (std::isnan(v)) return absl::InvalidArgumentError("cannot bin NaN");
    if (v < spec.lower || v > spec.upper) ++out.clamped;
    ++out.counts[spec.BucketOf(v)];
  }
  return out;
}

nlohmann::json NoisyHistogram::ToJson() const {
  nlohmann::json j;
  j["spec"] = spec.ToJson();
  j["counts"] = counts;
  j["epsilon"] = epsilon.has_value() ? nlohmann::json(*epsilon) : nlohmann::json(nullptr);
  j["client_id"] = client_id;
  return j;
}

absl::StatusOr<NoisyHistogram> NoisyHistogram::FromJson(const nlohmann::json& j) {
  NoisyHistogram h;
  try {
    FEDRASH_ASSIGN_OR_RETURN(h.spec, BucketSpec::FromJson(j.at("spec")));
    h.counts = j.at("counts").get<std::vector<int64_t>>();
    if (!j.at("epsilon").is_null()) h.epsilon = j.at("epsilon").get<double>();
    h.client_id = j.at("client_id").get<int>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrFormat("bad histogram: %s", e.what()));
  }
  if (h.counts.size() != static_cast<size_t>(h.spec.n_buckets)) {
    return absl::InvalidArgumentError("histogram length does not match its spec");
  }
  if (std::any_of(h.counts.begin(), h.counts.end(), [](int64_t c) { return c < 0; })) {
    return absl::InvalidArgumentError("histogram has a negative count");
  }
  return h;
}

double TwoSidedGeometricPmf(int64_t k, double epsilon) {
  const double a = std::exp(-epsilon);
  return (1.0 - a) / (1.0 + a) * std::exp(-epsilon * static_cast<double>(std::llabs(k)));
}

namespace {

int64_t SampleGeometric(CounterRng& rng, double log_a) {
  // P(G >= k) = a^k.
  const double g = std::floor(std::log(rng.UniformOpen()) / log_a);
  return g > 9.0e18 ? INT64_MAX / 4 : static_cast<int64_t>(g);
}

}  // namespace

int64_t SampleTwoSidedGeometric(CounterRng& rng, double epsilon) {
  const double log_a = -epsilon;
  const int64_t g1 = SampleGeometric(rng, log_a);
  const int64_t g2 = SampleGeometric(rng, log_a);
  return g1 - g2;
}

absl::StatusOr<NoisyHistogram> Privatize(std::span<const int64_t> counts,
                                         const BucketSpec& spec, double epsilon,
                                         int64_t cap, std::optional<uint64_t> seed,
                                         int client_id) {
  FEDRASH_RETURN_IF_ERROR(spec.Validate());
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("epsilon must be finite and > 0, got %g", epsilon));
  }
  if (counts.size() != static_cast<size_t>(spec.n_buckets)) {
    return absl::InvalidArgumentError("histogram length does not match its spec");
  }
  for (int64_t c : counts) {
    if (c < 0 || c > cap) {
      return absl::InvalidArgumentError(
          absl::StrFormat("count %d outside [0, cap=%d]", c, cap));
    }
  }
  uint64_t key = 0;
  if (seed.has_value()) {
    key = *seed;
  } else {
    std::random_device entropy;
    key = (static_cast<uint64_t>(entropy()) << 32) ^ entropy();
  }
  CounterRng rng = CounterRng(key).Split(RngStream::kDpNoise);
  NoisyHistogram out{spec, {}, epsilon, client_id};
  out.counts.reserve(counts.size());
  for (int64_t c : counts) {
    const int64_t noisy = c + SampleTwoSidedGeometric(rng, epsilon);
    out.counts.push_back(std::clamp<int64_t>(noisy, 0, cap));
  }
  return out;
}

absl::StatusOr<NoisyHistogram> ExactHistogram(std::span<const int64_t> counts,
                                              const BucketSpec& spec, int client_id) {
  FEDRASH_RETURN_IF_ERROR(spec.Validate());
  if (counts.size() != static_cast<size_t>(spec.n_buckets)) {
    return absl::InvalidArgumentError("histogram length does not match its spec");
  }
  if (std::any_of(counts.begin(), counts.end(), [](int64_t c) { return c < 0; })) {
    return absl::InvalidArgumentError("histogram has a negative count");
  }
  return NoisyHistogram{spec, {counts.begin(), counts.end()}, std::nullopt, client_id};
}

absl::StatusOr<AggregatedCdf> Aggregate(std::span<const NoisyHistogram> histograms) {
  if (histograms.empty()) return absl::InvalidArgumentError("no histograms to aggregate");
  AggregatedCdf out;
  out.spec = histograms[0].spec;
  FEDRASH_RETURN_IF_ERROR(out.spec.Validate());
  std::vector<int64_t> sum(out.spec.n_buckets, 0);
  for (const NoisyHistogram& h : histograms) {
    if (!(h.spec == out.spec)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "client %d uses a different bucket spec", h.client_id));
    }
    if (h.counts.size() != sum.size()) {
      return absl::InvalidArgumentError("histogram length does not match its spec");
    }
    for (size_t i = 0; i < sum.size(); ++i) sum[i] += h.counts[i];
  }
  out.cumulative.resize(sum.size());
  int64_t running = 0;
  for (size_t i = 0; i < sum.size(); ++i) {
    running += sum[i];
    out.cumulative[i] = running;
  }
  out.total = running;
  out.empty = running == 0;
  out.cdf.assign(sum.size(), 0.0);
  if (!out.empty) {
    for (size_t i = 0; i < sum.size(); ++i) {
      out.cdf[i] = static_cast<double>(out.cumulative[i]) / static_cast<double>(running);
    }
  }
  return out;
}

absl::StatusOr<double> DpQuantile(const AggregatedCdf& cdf, double q) {
  if (!(q > 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError(absl::StrFormat("q=%g outside (0, 1]", q));
  }
  if (cdf.empty) return absl::FailedPreconditionError("quantile of an empty histogram");
  // Compared on integer counts so that CDF >= q is decided exactly.
  const double target = std::ceil(q * static_cast<double>(cdf.total) - 1e-9);
  const int64_t rank = std::max<int64_t>(1, static_cast<int64_t>(target));
  const auto it = std::lower_bound(cdf.cumulative.begin(), cdf.cumulative.end(), rank);
  const int bucket = static_cast<int>(
      std::min<ptrdiff_t>(it - cdf.cumulative.begin(), cdf.spec.n_buckets - 1));
  return cdf.spec.UpperEdge(bucket);
}

absl::StatusOr<double> CdfSupDistance(const AggregatedCdf& a, const AggregatedCdf& b) {
  if (!(a.spec == b.spec) || a.cdf.size() != b.cdf.size()) {
    return absl::InvalidArgumentError("CDFs use different bucket specs");
  }
  double out = 0.0;
  for (size_t i = 0; i < a.cdf.size(); ++i) out = std::max(out, std::abs(a.cdf[i] - b.cdf[i]));
  return out;
}

}  // namespace fedrash
