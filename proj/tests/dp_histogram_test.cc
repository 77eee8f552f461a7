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
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace fedrash {
namespace {

BucketSpec Spec(double lo, double hi, int n) { return BucketSpec{lo, hi, n}; }

TEST(BucketSpecTest, PlacementAndValidation) {
  const BucketSpec s = Spec(0.0, 1.0, 10);
  EXPECT_TRUE(s.Validate().ok());
  EXPECT_EQ(s.BucketOf(0.0), 0);
  EXPECT_EQ(s.BucketOf(0.05), 0);
  EXPECT_EQ(s.BucketOf(0.1), 1);
  EXPECT_EQ(s.BucketOf(1.0), 9);  // The last bucket is closed.
  EXPECT_EQ(s.BucketOf(-3.0), 0);
  EXPECT_EQ(s.BucketOf(7.0), 9);
  EXPECT_DOUBLE_EQ(s.UpperEdge(9), 1.0);
  EXPECT_FALSE(Spec(1.0, 1.0, 10).Validate().ok());
  EXPECT_FALSE(Spec(0.0, 1.0, 0).Validate().ok());
  auto back = BucketSpec::FromJson(s.ToJson());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(*back, s);
}

TEST(BinValuesTest, Examples) {
  const BucketSpec s = Spec(0.0, 1.0, 8);
  auto empty = BinValues({}, s);
  ASSERT_TRUE(empty.ok());
  EXPECT_EQ(empty->counts, std::vector<int64_t>(8, 0));

  const std::vector<double> lows(5, 0.0);
  auto at_lower = BinValues(lows, s);
  EXPECT_EQ(at_lower->counts[0], 5);

  std::vector<double> grid;
  for (int i = 0; i < 8; ++i) grid.push_back((i + 0.5) / 8.0);
  auto ones = BinValues(grid, s);
  EXPECT_EQ(ones->counts, std::vector<int64_t>(8, 1));
  EXPECT_EQ(ones->clamped, 0u);

  const std::vector<double> outside = {-0.5, 1.5, 0.5};
  auto clamped = BinValues(outside, s);
  EXPECT_EQ(clamped->clamped, 2u);
  EXPECT_FALSE(BinValues(std::vector<double>{std::nan("")}, s).ok());
}

TEST(GeometricTest, PmfSumsToOne) {
  for (double eps : {0.1, 1.0, 5.0}) {
    double total = 0.0;
    for (int64_t k = -2000; k <= 2000; ++k) total += TwoSidedGeometricPmf(k, eps);
    EXPECT_NEAR(total, 1.0, 1e-12) << eps;
  }
}

TEST(GeometricTest, EmpiricalPmfMatches) {
  // 10^6 draws keep sampling error well below the 0.01 bound.
  CounterRng rng(DeriveSeed({8, 1}));
  EXPECT_LT(testing::GeometricNoiseTv(rng, 0.1, 1000000), 0.01);
  CounterRng rng2(DeriveSeed({8, 2}));
  EXPECT_LT(testing::GeometricNoiseTv(rng2, 1.0, 100000), 0.01);
}

TEST(PrivatizeTest, HugeEpsilonIsExact) {
  const BucketSpec s = Spec(0.0, 1.0, 20);
  std::vector<int64_t> counts(20);
  for (int i = 0; i < 20; ++i) counts[i] = i % 4;
  int deviations = 0;
  for (uint64_t trial = 0; trial < 1000; ++trial) {
    auto h = Privatize(counts, s, 1e9, 10, trial);
    ASSERT_TRUE(h.ok());
    deviations += h->counts != counts;
  }
  EXPECT_EQ(deviations, 0);
}

TEST(PrivatizeTest, CountsStayInRange) {
  const BucketSpec s = Spec(0.0, 1.0, 100);
  std::vector<int64_t> counts(100, 0);
  counts[3] = 7;
  counts[50] = 9;
  for (uint64_t trial = 0; trial < 50; ++trial) {
    auto h = Privatize(counts, s, 0.1, 9, trial);
    ASSERT_TRUE(h.ok());
    for (int64_t c : h->counts) {
      EXPECT_GE(c, 0);
      EXPECT_LE(c, 9);
    }
    EXPECT_EQ(h->epsilon, 0.1);
  }
}

TEST(PrivatizeTest, SeededIsDeterministic) {
  const BucketSpec s = Spec(0.0, 1.0, 30);
  const std::vector<int64_t> counts(30, 2);
  auto a = Privatize(counts, s, 0.5, 5, 123);
  auto b = Privatize(counts, s, 0.5, 5, 123);
  EXPECT_EQ(a->counts, b->counts);
  auto unseeded = Privatize(counts, s, 0.5, 5, std::nullopt);
  EXPECT_TRUE(unseeded.ok());
}

TEST(PrivatizeTest, RejectsBadInput) {
  const BucketSpec s = Spec(0.0, 1.0, 3);
  const std::vector<int64_t> counts = {1, 2, 3};
  EXPECT_FALSE(Privatize(counts, s, 0.0, 5, 1).ok());
  EXPECT_FALSE(Privatize(counts, s, 0.1, 2, 1).ok());
  EXPECT_FALSE(Privatize(std::vector<int64_t>{1}, s, 0.1, 5, 1).ok());
}

TEST(HistogramJsonTest, RoundTrip) {
  const BucketSpec s = Spec(0.0, 0.5, 4);
  auto h = Privatize(std::vector<int64_t>{1, 0, 3, 2}, s, 0.3, 3, 9, 17);
  auto back = NoisyHistogram::FromJson(h->ToJson());
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(back->counts, h->counts);
  EXPECT_EQ(back->epsilon, h->epsilon);
  EXPECT_EQ(back->client_id, 17);
  auto exact = ExactHistogram(std::vector<int64_t>{1, 0, 3, 2}, s);
  auto exact_back = NoisyHistogram::FromJson(exact->ToJson());
  EXPECT_FALSE(exact_back->epsilon.has_value());
}

TEST(AggregateTest, SingleExactHistogramIsEmpiricalCdf) {
  const BucketSpec s = Spec(0.0, 1.0, 4);
  auto h = ExactHistogram(std::vector<int64_t>{1, 2, 0, 1}, s);
  const std::vector<NoisyHistogram> hs = {*h};
  auto cdf = Aggregate(hs);
  ASSERT_TRUE(cdf.ok());
  EXPECT_EQ(cdf->total, 4);
  EXPECT_EQ(cdf->cdf, (std::vector<double>{0.25, 0.75, 0.75, 1.0}));
}

TEST(AggregateTest, DisjointSupportsGiveTwoPlateaus) {
  const BucketSpec s = Spec(0.0, 1.0, 6);
  auto a = ExactHistogram(std::vector<int64_t>{3, 0, 0, 0, 0, 0}, s, 0);
  auto b = ExactHistogram(std::vector<int64_t>{0, 0, 0, 0, 0, 3}, s, 1);
  const std::vector<NoisyHistogram> hs = {*a, *b};
  auto cdf = Aggregate(hs);
  EXPECT_EQ(cdf->cdf, (std::vector<double>{0.5, 0.5, 0.5, 0.5, 0.5, 1.0}));
}

TEST(AggregateTest, EmptyIsFlagged) {
  const BucketSpec s = Spec(0.0, 1.0, 3);
  auto z = ExactHistogram(std::vector<int64_t>{0, 0, 0}, s);
  const std::vector<NoisyHistogram> hs = {*z, *z};
  auto cdf = Aggregate(hs);
  ASSERT_TRUE(cdf.ok());
  EXPECT_TRUE(cdf->empty);
  EXPECT_EQ(cdf->total, 0);
  EXPECT_EQ(cdf->cdf, std::vector<double>(3, 0.0));
  EXPECT_FALSE(DpQuantile(*cdf, 0.5).ok());
}

TEST(AggregateTest, MismatchedSpecsFail) {
  auto a = ExactHistogram(std::vector<int64_t>{1, 1}, Spec(0.0, 1.0, 2));
  auto b = ExactHistogram(std::vector<int64_t>{1, 1}, Spec(0.0, 0.5, 2));
  const std::vector<NoisyHistogram> hs = {*a, *b};
  EXPECT_FALSE(Aggregate(hs).ok());
}

TEST(DpQuantileTest, UpperEdgeRule) {
  const BucketSpec s = Spec(0.0, 1.0, 4);
  auto h = ExactHistogram(std::vector<int64_t>{1, 2, 0, 1}, s);
  const std::vector<NoisyHistogram> hs = {*h};
  auto cdf = Aggregate(hs);
  EXPECT_DOUBLE_EQ(*DpQuantile(*cdf, 0.5), 0.5);  // Crosses inside bucket 1.
  EXPECT_DOUBLE_EQ(*DpQuantile(*cdf, 0.25), 0.25);
  EXPECT_DOUBLE_EQ(*DpQuantile(*cdf, 1.0), 1.0);
  EXPECT_FALSE(DpQuantile(*cdf, 0.0).ok());
}

TEST(DpQuantileTest, NoiselessWithinOneBucketOfExact) {
  CounterRng rng(31);
  const BucketSpec s = Spec(0.0, 1.0, 1000);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(1 + rng.UniformInt(500));
    for (double& x : v) x = rng.Uniform() * rng.Uniform();
    auto bins = BinValues(v, s);
    auto h = ExactHistogram(bins->counts, s);
    const std::vector<NoisyHistogram> hs = {*h};
    auto cdf = Aggregate(hs);
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (double q : {0.25, 0.5, 0.75, 0.9}) {
      const size_t rank =
          std::max<size_t>(1, static_cast<size_t>(std::ceil(q * sorted.size() - 1e-9)));
      EXPECT_LE(std::abs(*DpQuantile(*cdf, q) - sorted[rank - 1]), s.width() + 1e-12);
    }
  }
}

TEST(CdfSupDistanceTest, Basic) {
  const BucketSpec s = Spec(0.0, 1.0, 2);
  auto a = ExactHistogram(std::vector<int64_t>{1, 1}, s);
  auto b = ExactHistogram(std::vector<int64_t>{3, 1}, s);
  const std::vector<NoisyHistogram> ha = {*a}, hb = {*b};
  EXPECT_DOUBLE_EQ(*CdfSupDistance(*Aggregate(ha), *Aggregate(hb)), 0.25);
}

}  // namespace
}  // namespace fedrash
