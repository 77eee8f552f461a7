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

#include "fedrash/fairness.h"

#include <set>
#include <string>
#include <vector>

#include "fedrash/csv.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedrash {
namespace {

using V = std::vector<int>;

TEST(ParityGapTest, Examples) {
  auto same = DemographicParityGap(V{1, 0, 1, 0}, V{1, 1, 0, 0});
  ASSERT_TRUE(same.ok());
  EXPECT_EQ(same->gap, 0.0);
  EXPECT_EQ(same->status, GapStatus::kOk);

  auto full = DemographicParityGap(V{1, 1, 0, 0}, V{1, 1, 0, 0});
  EXPECT_EQ(full->gap, 1.0);

  auto counted = DemographicParityGap(V{1, 1, 0, 0}, V{1, 0, 1, 0});
  EXPECT_EQ(counted->gap, 0.0);

  auto uneven = DemographicParityGap(V{1, 1, 1, 0, 0}, V{1, 1, 1, 1, 0});
  EXPECT_DOUBLE_EQ(uneven->gap, 0.75);
}

TEST(ParityGapTest, EmptyGroupIsUndefined) {
  auto g = DemographicParityGap(V{1, 0, 1}, V{1, 1, 1});
  ASSERT_TRUE(g.ok());
  EXPECT_EQ(g->status, GapStatus::kUndefined);
}

TEST(ParityGapTest, RejectsBadInput) {
  EXPECT_FALSE(DemographicParityGap(V{1, 0}, V{1}).ok());
  EXPECT_FALSE(DemographicParityGap(V{2, 0}, V{1, 0}).ok());
  EXPECT_FALSE(DemographicParityGap(V{1, 0}, V{1, 3}).ok());
}

TEST(ParityGapTest, PermutationInvariantAndConstantPredictorIsFair) {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const size_t n = 4 + rng.UniformInt(50);
    V dec(n), z(n);
    for (size_t i = 0; i < n; ++i) {
      dec[i] = static_cast<int>(rng.UniformInt(2));
      z[i] = static_cast<int>(i % 2);
    }
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    rng.Shuffle(std::span<size_t>(perm));
    V pd(n), pz(n);
    for (size_t i = 0; i < n; ++i) {
      pd[i] = dec[perm[i]];
      pz[i] = z[perm[i]];
    }
    EXPECT_EQ(DemographicParityGap(dec, z)->gap, DemographicParityGap(pd, pz)->gap);
    EXPECT_EQ(DemographicParityGap(V(n, 1), z)->gap, 0.0);
  }
}

RashomonSelection AllMembers(size_t n) {
  RashomonSelection s;
  s.members.assign(n, true);
  return s;
}

TEST(FairnessSweepTest, SamplesWithoutReplacement) {
  testing::RandomTensorOptions opt;
  opt.with_sensitive = true;
  opt.max_candidates = 40;
  opt.max_clients = 5;
  const PredictionTensor t = testing::RandomTensor(4, opt);
  const size_t m = t.num_candidates();
  auto report = FairnessSweep(t, AllMembers(m), 15, 77);
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_EQ(report->sampled.size(), std::min<size_t>(15, m));
  EXPECT_EQ(std::set<size_t>(report->sampled.begin(), report->sampled.end()).size(),
            report->sampled.size());
  EXPECT_TRUE(std::is_sorted(report->sampled.begin(), report->sampled.end()));
  // One row per (client, candidate) plus one pooled row per candidate.
  EXPECT_EQ(report->rows.size(), report->sampled.size() * (t.num_clients() + 1));
  auto again = FairnessSweep(t, AllMembers(m), 15, 77);
  EXPECT_EQ(again->sampled, report->sampled);
}

TEST(FairnessSweepTest, RowsMatchDirectComputation) {
  testing::RandomTensorOptions opt;
  opt.with_sensitive = true;
  opt.max_clients = 3;
  const PredictionTensor t = testing::RandomTensor(5, opt);
  auto report = FairnessSweep(t, AllMembers(t.num_candidates()), 3, 1);
  ASSERT_TRUE(report.ok());
  for (const FairnessRow& row : report->rows) {
    if (row.client == "global") continue;
    const size_t idx = *t.IndexOf(std::stoi(row.client));
    EXPECT_DOUBLE_EQ(row.accuracy, t.Accuracy(idx, row.candidate));
    auto gap = DemographicParityGap(t.Decisions(idx, row.candidate), *t.client(idx).sensitive);
    EXPECT_EQ(row.dp_gap.status, gap->status);
    if (gap->status == GapStatus::kOk) EXPECT_DOUBLE_EQ(row.dp_gap.gap, gap->gap);
  }
}

TEST(FairnessSweepTest, PooledGapDiffersFromClientMean) {
  // Exists on random data: the pooled gap is not a weighted mean of client gaps.
  bool found = false;
  for (uint64_t seed = 0; seed < 10 && !found; ++seed) {
    testing::RandomTensorOptions opt;
    opt.with_sensitive = true;
    opt.max_clients = 4;
    const PredictionTensor t = testing::RandomTensor(seed + 10, opt);
    if (t.num_clients() < 2) continue;
    auto report = FairnessSweep(t, AllMembers(t.num_candidates()), 1, seed);
    double weighted = 0.0, pooled = -1.0;
    size_t total = 0;
    for (const FairnessRow& row : report->rows) {
      if (row.client == "global") {
        pooled = row.dp_gap.gap;
      } else {
        const size_t idx = *t.IndexOf(std::stoi(row.client));
        weighted += row.dp_gap.gap * t.n_test(idx);
        total += t.n_test(idx);
      }
    }
    found = std::abs(pooled - weighted / total) > 1e-6;
  }
  EXPECT_TRUE(found);
}

TEST(FairnessSweepTest, RequiresSensitiveAttribute) {
  const PredictionTensor t = testing::RandomTensor(6);
  auto report = FairnessSweep(t, AllMembers(t.num_candidates()), 3, 1);
  EXPECT_EQ(report.status().code(), absl::StatusCode::kFailedPrecondition);
}

TEST(FairnessReportTest, CsvLayout) {
  FairnessReport r;
  r.sampled = {2};
  r.rows.push_back({"0", 2, 0.75, {0.125, GapStatus::kOk}});
  r.rows.push_back({"global", 2, 0.5, {0.0, GapStatus::kUndefined}});
  auto rows = ParseCsv(r.ToCsv());
  ASSERT_TRUE(rows.ok());
  ASSERT_EQ(rows->size(), 3u);
  EXPECT_EQ((*rows)[0], (CsvRow{"client", "candidate", "accuracy", "dp_gap", "status"}));
  EXPECT_EQ((*rows)[1][3], "0.125");
  EXPECT_EQ((*rows)[2][3], "");
  EXPECT_EQ((*rows)[2][4], "undefined");
}

TEST(SmallestSufficientEpsilonTest, FirstLargeEnough) {
  std::vector<RashomonSelection> sels(3);
  sels[0].members = {true, false, false, false};
  sels[1].members = {true, true, false, true};
  sels[2].members = {true, true, true, true};
  EXPECT_EQ(SmallestSufficientEpsilon(sels, 3), 1u);
  EXPECT_EQ(SmallestSufficientEpsilon(sels, 1), 0u);
  EXPECT_FALSE(SmallestSufficientEpsilon(sels, 5).has_value());
}

}  // namespace
}  // namespace fedrash
