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

#include "fedrash/multiplicity.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fedrash/rashomon.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedrash {
namespace {

using testing::TensorFromDecisions;

RashomonSelection Members(size_t pool, std::vector<size_t> idx, size_t baseline) {
  RashomonSelection s;
  s.members.assign(pool, false);
  for (size_t i : idx) s.members[i] = true;
  s.baseline_index = baseline;
  return s;
}

double H2(double p) { return -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

// Plain Blahut-Arimoto with a fixed iteration count; slow but simple.
double ReferenceCapacity(const Matrix& w, int iters) {
  const size_t m = w.rows(), d = w.cols();
  std::vector<double> p(m, 1.0 / m);
  double lower = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> q(d, 0.0);
    for (size_t x = 0; x < m; ++x) {
      for (size_t y = 0; y < d; ++y) q[y] += p[x] * w(x, y);
    }
    std::vector<double> c(m, 0.0);
    for (size_t x = 0; x < m; ++x) {
      double div = 0.0;
      for (size_t y = 0; y < d; ++y) {
        if (w(x, y) > 0) div += w(x, y) * std::log(w(x, y) / q[y]);
      }
      c[x] = std::exp(div);
    }
    const double z = std::inner_product(p.begin(), p.end(), c.begin(), 0.0);
    lower = std::log2(z);
    for (size_t x = 0; x < m; ++x) p[x] = p[x] * c[x] / z;
  }
  return lower;
}

Matrix RandomStochastic(CounterRng& rng, size_t m, size_t d, double alpha = 1.0) {
  Matrix w(m, d);
  for (size_t x = 0; x < m; ++x) {
    const auto row = rng.Dirichlet(alpha, static_cast<int>(d));
    for (size_t y = 0; y < d; ++y) w(x, y) = row[y];
  }
  return w;
}

// Two clients, three candidates; baseline 0.
//   client 0 (5 samples): cand1 flips sample 0; cand2 flips samples 1, 2.
//   client 1 (3 samples): cand1 flips samples 0, 1, 2; cand2 agrees.
PredictionTensor FlipTensor() {
  return TensorFromDecisions(
      {{{0, 0, 0, 0, 0}, {1, 0, 0, 0, 0}, {0, 1, 1, 0, 0}},
       {{1, 1, 0}, {0, 0, 1}, {1, 1, 0}}},
      {{0, 0, 0, 0, 0}, {1, 1, 0}});
}

TEST(AmbiguityTest, BaselineOnlyIsZero) {
  const PredictionTensor t = FlipTensor();
  EXPECT_EQ(*AmbiguityLocal(t, 0, Members(3, {0}, 0)), 0.0);
  EXPECT_EQ(*DiscrepancyLocal(t, 0, Members(3, {0}, 0)), 0.0);
}

TEST(AmbiguityTest, TotalConflictIsOne) {
  const PredictionTensor t =
      TensorFromDecisions({{{0, 0, 0, 0}, {1, 1, 1, 1}}}, {{0, 1, 0, 1}});
  EXPECT_EQ(*AmbiguityLocal(t, 0, Members(2, {0, 1}, 0)), 1.0);
}

TEST(AmbiguityTest, MatchesEnumeration) {
  const PredictionTensor t = FlipTensor();
  const RashomonSelection all = Members(3, {0, 1, 2}, 0);
  EXPECT_DOUBLE_EQ(*AmbiguityLocal(t, 0, all), 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(*AmbiguityLocal(t, 1, all), 1.0);
  EXPECT_DOUBLE_EQ(*AmbiguityLocal(t, 0, Members(3, {0, 1}, 0)), 1.0 / 5.0);
  // Brute force over members and samples on random toys.
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const PredictionTensor r = testing::RandomTensor(seed);
    const RashomonSelection sel =
        Members(r.num_candidates(), [&] {
          std::vector<size_t> v;
          for (size_t j = 0; j < r.num_candidates(); j += 2) v.push_back(j);
          return v;
        }(), 0);
    for (size_t c = 0; c < r.num_clients(); ++c) {
      size_t amb = 0;
      for (size_t s = 0; s < r.n_test(c); ++s) {
        bool differs = false;
        for (size_t j = 0; j < r.num_candidates(); j += 2) {
          differs |= r.Decision(c, j, s) != r.Decision(c, 0, s);
        }
        amb += differs;
      }
      EXPECT_DOUBLE_EQ(*AmbiguityLocal(r, r.client(c).client_id, sel),
                       static_cast<double>(amb) / r.n_test(c));
    }
  }
}

TEST(AmbiguityGlobalTest, WeightedMean) {
  const std::vector<LocalValue> one = {{0.3, 10}};
  EXPECT_DOUBLE_EQ(AmbiguityGlobal(one), 0.3);
  const std::vector<LocalValue> two = {{0.0, 7}, {1.0, 7}};
  EXPECT_DOUBLE_EQ(AmbiguityGlobal(two), 0.5);
}

TEST(AmbiguityGlobalTest, EqualsPooled) {
  const PredictionTensor t = FlipTensor();
  const RashomonSelection all = Members(3, {0, 1, 2}, 0);
  std::vector<LocalValue> locals = {{*AmbiguityLocal(t, 0, all), 5},
                                    {*AmbiguityLocal(t, 1, all), 3}};
  const std::vector<int> ids = {0, 1};
  EXPECT_NEAR(AmbiguityGlobal(locals), *PooledAmbiguity(t, ids, all), 1e-12);
  EXPECT_DOUBLE_EQ(*PooledAmbiguity(t, ids, all), 6.0 / 8.0);
}

TEST(DiscrepancyTest, SingleFlippingMember) {
  const PredictionTensor t = FlipTensor();
  EXPECT_DOUBLE_EQ(*DiscrepancyLocal(t, 0, Members(3, {0, 2}, 0)), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(*DiscrepancyLocal(t, 0, Members(3, {0, 1, 2}, 0)), 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(*DiscrepancyLocal(t, 1, Members(3, {0, 1, 2}, 0)), 1.0);
}

TEST(DiscrepancyTest, FederatedArithmetic) {
  const std::vector<LocalValue> two = {{0.2, 50}, {0.4, 50}};
  EXPECT_DOUBLE_EQ(DiscrepancyFederated(two), 0.2);
  const std::vector<LocalValue> one = {{0.35, 9}};
  EXPECT_DOUBLE_EQ(DiscrepancyFederated(one), 0.35);
}

TEST(DiscrepancyTest, FederatedBelowPooled) {
  const PredictionTensor t = FlipTensor();
  const RashomonSelection all = Members(3, {0, 1, 2}, 0);
  std::vector<LocalValue> locals = {{*DiscrepancyLocal(t, 0, all), 5},
                                    {*DiscrepancyLocal(t, 1, all), 3}};
  const std::vector<int> ids = {0, 1};
  // Federated: max(5/8 * 2/5, 3/8 * 1) = 3/8. Pooled: cand1 flips 4 of 8.
  EXPECT_DOUBLE_EQ(DiscrepancyFederated(locals), 3.0 / 8.0);
  EXPECT_DOUBLE_EQ(*PooledDiscrepancy(t, ids, all), 4.0 / 8.0);
}

TEST(DisagreementTest, ClosedForm) {
  EXPECT_EQ(DisagreementFromCounts(0, 5), 0.0);
  EXPECT_EQ(DisagreementFromCounts(5, 5), 0.0);
  EXPECT_EQ(DisagreementFromCounts(3, 6), 1.0);
  EXPECT_EQ(DisagreementFromCounts(1, 4), 0.75);
  // Ordered pairs for k = 1, m = 4: 6 of 16 disagree.
  size_t differ = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) differ += (a == 0) != (b == 0);
  }
  EXPECT_EQ(differ, 6u);
  EXPECT_EQ(DisagreementFromCounts(1, 4), 2.0 * differ / 16.0);
}

TEST(DisagreementTest, ThresholdsClassOneScore) {
  const PredictionTensor t = FlipTensor();
  const RashomonSelection all = Members(3, {0, 1, 2}, 0);
  EXPECT_DOUBLE_EQ(*Disagreement(t, 0, 0, all, 0.5), DisagreementFromCounts(1, 3));
  EXPECT_DOUBLE_EQ(*Disagreement(t, 0, 4, all, 0.5), 0.0);
  // Every score (0.2 or 0.8) exceeds tau = 0.1.
  EXPECT_DOUBLE_EQ(*Disagreement(t, 0, 0, all, 0.1), 0.0);
  EXPECT_FALSE(Disagreement(t, 0, 9, all, 0.5).ok());
  testing::RandomTensorOptions opt;
  opt.d_out = 3;
  const PredictionTensor multi = testing::RandomTensor(1, opt);
  EXPECT_FALSE(Disagreement(multi, multi.client(0).client_id, 0,
                            Members(multi.num_candidates(), {0}, 0), 0.5)
                   .ok());
}

TEST(CapacityTest, BinarySymmetricChannel) {
  auto rc = RashomonCapacity(Matrix(2, 2, {0.9, 0.1, 0.1, 0.9}));
  ASSERT_TRUE(rc.ok()) << rc.status();
  EXPECT_NEAR(rc->bits, 1.0 - H2(0.1), 1e-6);
  EXPECT_NEAR(rc->bits, 0.531, 1e-3);
}

TEST(CapacityTest, IdenticalRowsAreZero) {
  auto rc = RashomonCapacity(Matrix(3, 3, {0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5}));
  ASSERT_TRUE(rc.ok());
  EXPECT_NEAR(rc->bits, 0.0, 1e-9);
}

TEST(CapacityTest, OneHotRows) {
  auto two = RashomonCapacity(Matrix(2, 2, {1, 0, 0, 1}));
  ASSERT_TRUE(two.ok());
  EXPECT_NEAR(two->bits, 1.0, 1e-9);
  auto three = RashomonCapacity(Matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  ASSERT_TRUE(three.ok());
  EXPECT_NEAR(three->bits, std::log2(3.0), 1e-9);
}

TEST(CapacityTest, AsymmetricBinaryMatchesReference) {
  // Z-channel: capacity log2(1 + (1-p) p^(p/(1-p))) for crossover p.
  const double p = 0.3;
  auto rc = RashomonCapacity(Matrix(2, 2, {1.0, 0.0, p, 1 - p}));
  ASSERT_TRUE(rc.ok());
  EXPECT_NEAR(rc->bits, std::log2(1 + (1 - p) * std::pow(p, p / (1 - p))), 1e-9);
}

TEST(CapacityTest, MatchesPlainBlahutArimoto) {
  CounterRng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix w = RandomStochastic(rng, 5, 4);
    auto rc = RashomonCapacity(w);
    ASSERT_TRUE(rc.ok()) << rc.status();
    EXPECT_NEAR(rc->bits, ReferenceCapacity(w, 20000), 1e-6);
    EXPECT_LE(rc->lower_bits, rc->upper_bits);
    EXPECT_LT(rc->upper_bits - rc->lower_bits, 1e-9);
  }
}

TEST(CapacityTest, BoundsAndDuplicateInvariance) {
  CounterRng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix w = RandomStochastic(rng, 5, 4, 0.5);
    auto rc = RashomonCapacity(w);
    ASSERT_TRUE(rc.ok()) << rc.status();
    EXPECT_GE(rc->bits, 0.0);
    EXPECT_LE(rc->bits, 2.0 + 1e-12);
    std::vector<size_t> dup = {0, 1, 2, 3, 4, 2, 0};
    auto rc2 = RashomonCapacity(w.SelectRows(dup));
    ASSERT_TRUE(rc2.ok());
    EXPECT_NEAR(rc->bits, rc2->bits, 1e-9);
  }
}

TEST(CapacityTest, LargeNearlyIdenticalSets) {
  // Many members scoring within 1e-7 of each other, as in tight sets.
  CounterRng rng(14);
  const auto base = rng.Dirichlet(1.0, 4);
  Matrix w(60, 4);
  for (size_t x = 0; x < 60; ++x) {
    double sum = 0.0;
    for (size_t y = 0; y < 4; ++y) {
      w(x, y) = base[y] * (1.0 + 1e-7 * rng.Uniform());
      sum += w(x, y);
    }
    for (size_t y = 0; y < 4; ++y) w(x, y) /= sum;
  }
  auto rc = RashomonCapacity(w);
  ASSERT_TRUE(rc.ok()) << rc.status();
  EXPECT_GE(rc->bits, 0.0);
  EXPECT_LT(rc->bits, 1e-9);
}

TEST(CapacityTest, RejectsInvalidRows) {
  EXPECT_FALSE(RashomonCapacity(Matrix(1, 2, {0.5, 0.6})).ok());
  EXPECT_FALSE(RashomonCapacity(Matrix(1, 2, {-0.1, 1.1})).ok());
  EXPECT_FALSE(RashomonCapacity(Matrix()).ok());
  CapacityOptions bad;
  bad.tolerance = 0.0;
  EXPECT_FALSE(RashomonCapacity(Matrix(1, 2, {0.5, 0.5}), bad).ok());
}

TEST(CapacityTest, IterationBudgetIsReported) {
  CounterRng rng(15);
  const Matrix w = RandomStochastic(rng, 30, 6, 0.3);
  CapacityOptions tight;
  tight.max_iters = 1;
  tight.tolerance = 1e-14;
  auto rc = RashomonCapacity(w, tight);
  ASSERT_FALSE(rc.ok());
  EXPECT_EQ(rc.status().code(), absl::StatusCode::kResourceExhausted);
}

TEST(VprTest, Examples) {
  EXPECT_EQ(Vpr(std::vector<double>{0.4}), 0.0);
  EXPECT_DOUBLE_EQ(Vpr(std::vector<double>{0.2, 0.9}), 0.7);
  CounterRng rng(16);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(1 + rng.UniformInt(30));
    for (double& x : v) x = rng.Uniform();
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    EXPECT_EQ(Vpr(v), s.back() - s.front());
  }
}

TEST(ScoreStdTest, Examples) {
  EXPECT_EQ(ScoreStd(std::vector<double>{0.3, 0.3, 0.3}), 0.0);
  EXPECT_DOUBLE_EQ(ScoreStd(std::vector<double>{0.0, 1.0}), 0.5);
  CounterRng rng(17);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(1 + rng.UniformInt(50));
    for (double& x : v) x = rng.Uniform();
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(ScoreStd(v), std::sqrt(ss / v.size()), 1e-12);
  }
}

TEST(RowMetricsTest, BinaryUsesClassOneAndMultiClassTakesMax) {
  const Matrix binary(3, 2, {0.1, 0.9, 0.6, 0.4, 0.3, 0.7});
  EXPECT_DOUBLE_EQ(VprOfRows(binary), 0.5);
  const Matrix multi(2, 3, {0.2, 0.3, 0.5, 0.6, 0.3, 0.1});
  EXPECT_DOUBLE_EQ(VprOfRows(multi), 0.4);
  EXPECT_DOUBLE_EQ(ScoreStdOfRows(multi), 0.2);
}

TEST(PerSampleMetricTest, LengthsAndRanges) {
  const PredictionTensor t = testing::RandomTensor(21);
  const RashomonSelection sel = Members(t.num_candidates(), {0}, 0);
  for (SampleMetric m :
       {SampleMetric::kRc, SampleMetric::kVpr, SampleMetric::kStd, SampleMetric::kDisagreement}) {
    auto v = PerSampleMetric(t, t.client(0).client_id, sel, m);
    ASSERT_TRUE(v.ok()) << SampleMetricName(m) << v.status();
    EXPECT_EQ(v->size(), t.n_test(0));
    for (double x : *v) EXPECT_EQ(x, 0.0);  // One member: no spread.
  }
}

TEST(PercentileTest, NearestRank) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const std::vector<double> ps = {0, 1, 50, 99, 100};
  auto rows = PercentileSummary(v, ps);
  ASSERT_TRUE(rows.ok());
  EXPECT_EQ((*rows)[0].value, 1.0);
  EXPECT_EQ((*rows)[1].value, 1.0);
  EXPECT_EQ((*rows)[2].value, 50.0);
  EXPECT_EQ((*rows)[3].value, 99.0);
  EXPECT_EQ((*rows)[4].value, 100.0);
  const std::vector<double> constant(7, 0.25);
  auto flat = PercentileSummary(constant, ps);
  ASSERT_TRUE(flat.ok());
  for (const auto& r : *flat) EXPECT_EQ(r.value, 0.25);
  EXPECT_FALSE(PercentileSummary(std::vector<double>{}, ps).ok());
  EXPECT_FALSE(PercentileSummary(v, std::vector<double>{101}).ok());
}

TEST(PercentileTest, MatchesSortOracle) {
  CounterRng rng(18);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> v(1 + rng.UniformInt(200));
    for (double& x : v) x = rng.Normal();
    std::vector<double> s = v;
    std::sort(s.begin(), s.end());
    const double p = 100.0 * rng.Uniform();
    auto rows = PercentileSummary(v, std::vector<double>{p});
    // Smallest value with at least p% of the data at or below it.
    size_t k = 0;
    while (100.0 * static_cast<double>(k + 1) < p * static_cast<double>(s.size())) ++k;
    EXPECT_EQ((*rows)[0].value, s[k]);
  }
}

}  // namespace
}  // namespace fedrash
