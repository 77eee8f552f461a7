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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "fedrash/config.h"
#include "fedrash/dp_histogram.h"
#include "fedrash/federation.h"
#include "fedrash/file_util.h"
#include "fedrash/model.h"
#include "fedrash/multiplicity.h"
#include "fedrash/pipeline.h"
#include "fedrash/prediction.h"
#include "fedrash/rashomon.h"
#include "fedrash/rng.h"
#include "test_util.h"

namespace fedrash {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure message; later checks still run.
class Checker {
 public:
  void Expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (first_.empty()) first_ = what;
  }
  Outcome Finish(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, absl::StrFormat("%s; %d failed checks, first: %s", summary,
                                   failures_, first_)};
  }

 private:
  int failures_ = 0;
  std::string first_;
};

std::vector<PerformanceConstraint> Eps(double e) { return {{PerformanceMetric::kAccuracy, e}}; }

bool Subset(const std::vector<bool>& a, const std::vector<bool>& b) {
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) return false;
  }
  return true;
}

RashomonSelection RandomMembers(CounterRng& rng, size_t n, size_t baseline) {
  RashomonSelection s;
  s.members.assign(n, false);
  for (size_t j = 0; j < n; ++j) s.members[j] = rng.Uniform() < 0.5;
  s.members[baseline] = true;
  s.baseline_index = baseline;
  return s;
}

// Criteria 1 and 2 share the tensors: each uses the global selections at a
// few tolerances plus one random member subset.
std::vector<std::pair<PredictionTensor, std::vector<RashomonSelection>>> SharedCases() {
  std::vector<std::pair<PredictionTensor, std::vector<RashomonSelection>>> out;
  CounterRng rng(DeriveSeed({1, 2, 3}));
  for (uint64_t seed = 0; seed < 50; ++seed) {
    PredictionTensor t = testing::RandomTensor(DeriveSeed({1, seed}));
    const std::vector<int> ids = t.client_ids();
    const size_t base = *SelectBaseline(t, ids);
    std::vector<RashomonSelection> sels;
    for (double e : {0.0, 0.02, 0.1}) sels.push_back(*BuildGlobal(t, ids, Eps(e), base));
    sels.push_back(RandomMembers(rng, t.num_candidates(), base));
    out.emplace_back(std::move(t), std::move(sels));
  }
  return out;
}

Outcome Criterion1() {
  Checker check;
  double worst = 0.0;
  for (const auto& [t, sels] : SharedCases()) {
    for (const RashomonSelection& sel : sels) {
      std::vector<LocalValue> locals;
      for (int id : t.client_ids()) {
        locals.push_back({*AmbiguityLocal(t, id, sel), t.n_test(*t.IndexOf(id))});
      }
      const double diff = std::abs(AmbiguityGlobal(locals) - *PooledAmbiguity(t, t.client_ids(), sel));
      worst = std::max(worst, diff);
      check.Expect(diff <= 1e-12, absl::StrFormat("difference %g", diff));
    }
  }
  return check.Finish(absl::StrFormat("50 tensors, max |federated - pooled| = %.3g", worst));
}

Outcome Criterion2() {
  Checker check;
  int strict = 0;
  int cases = 0;
  for (const auto& [t, sels] : SharedCases()) {
    for (const RashomonSelection& sel : sels) {
      std::vector<LocalValue> locals;
      for (int id : t.client_ids()) {
        locals.push_back({*DiscrepancyLocal(t, id, sel), t.n_test(*t.IndexOf(id))});
      }
      const double fed = DiscrepancyFederated(locals);
      const double pooled = *PooledDiscrepancy(t, t.client_ids(), sel);
      check.Expect(fed <= pooled, absl::StrFormat("federated %g > pooled %g", fed, pooled));
      strict += fed < pooled;
      ++cases;
    }
  }
  check.Expect(strict > 0, "no strict case");
  return check.Finish(absl::StrFormat("%d selections, %d strictly below pooled", cases, strict));
}

// Brute-force definitions from raw decisions with integer arithmetic.
struct Toy {
  std::vector<std::vector<std::vector<int>>> decisions;  // [c][j][s]
  std::vector<std::vector<int>> labels;
};

Toy RandomToy(CounterRng& rng, size_t n_clients) {
  Toy toy;
  const size_t m = 1 + rng.UniformInt(8);
  for (size_t c = 0; c < n_clients; ++c) {
    const size_t n = 1 + rng.UniformInt(6);
    std::vector<int> y(n);
    for (int& v : y) v = static_cast<int>(rng.UniformInt(2));
    toy.labels.push_back(y);
    std::vector<std::vector<int>> per_cand;
    for (size_t j = 0; j < m; ++j) {
      std::vector<int> d(n);
      for (int& v : d) v = static_cast<int>(rng.UniformInt(2));
      per_cand.push_back(d);
    }
    toy.decisions.push_back(per_cand);
  }
  return toy;
}

Outcome Criterion3() {
  Checker check;
  CounterRng rng(DeriveSeed({3}));
  // Tolerances stay away from k/n for n <= 6 so float sums cannot straddle
  // the boundary; t is expressed in tenths.
  const std::vector<double> eps = {0.0, 0.0731, 0.1517, 0.2893, 0.4127, 0.6211, 1.01};
  const std::vector<int> t_tenths = {1, 2, 4, 5, 6, 8, 10};
  int tensors = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const size_t n_clients = 1 + static_cast<size_t>(trial % 5);
    const Toy toy = RandomToy(rng, n_clients);
    const PredictionTensor t = testing::TensorFromDecisions(toy.decisions, toy.labels);
    ++tensors;
    const size_t m = toy.decisions[0].size();
    std::vector<std::vector<int>> correct(n_clients, std::vector<int>(m, 0));
    std::vector<int> total_correct(m, 0);
    int total_n = 0;
    for (size_t c = 0; c < n_clients; ++c) {
      total_n += static_cast<int>(toy.labels[c].size());
      for (size_t j = 0; j < m; ++j) {
        for (size_t s = 0; s < toy.labels[c].size(); ++s) {
          correct[c][j] += toy.decisions[c][j][s] == toy.labels[c][s];
        }
        total_correct[j] += correct[c][j];
      }
    }
    size_t base = 0;
    for (size_t j = 1; j < m; ++j) {
      if (total_correct[j] > total_correct[base]) base = j;
    }
    const std::vector<int> ids = t.client_ids();
    auto got_base = SelectBaseline(t, ids);
    check.Expect(got_base.ok() && *got_base == base, "baseline");
    auto client_pass = [&](size_t c, size_t j, double e) {
      const double n = static_cast<double>(toy.labels[c].size());
      return std::abs(correct[c][j] - correct[c][base]) / n <= e;
    };
    std::vector<bool> prev_global;
    std::map<int, std::vector<bool>> prev_t;
    for (double e : eps) {
      std::vector<bool> g(m), full(m, true);
      for (size_t j = 0; j < m; ++j) {
        int gap = 0;
        for (size_t c = 0; c < n_clients; ++c) gap += std::abs(correct[c][j] - correct[c][base]);
        g[j] = static_cast<double>(gap) / total_n <= e;
      }
      auto global = BuildGlobal(t, ids, Eps(e), base);
      check.Expect(global.ok() && global->members == g, "global membership");
      if (!prev_global.empty()) check.Expect(Subset(prev_global, g), "global monotone in eps");
      prev_global = g;

      std::vector<std::vector<bool>> individual;
      for (size_t c = 0; c < n_clients; ++c) {
        std::vector<bool> ind(m);
        for (size_t j = 0; j < m; ++j) ind[j] = client_pass(c, j, e);
        auto built = BuildIndividual(t, ids[c], Eps(e), base);
        check.Expect(built.ok() && built->members == ind, "individual membership");
        for (size_t j = 0; j < m; ++j) full[j] = full[j] && ind[j];
        individual.push_back(ind);
      }
      std::vector<bool> looser;
      for (int tt : t_tenths) {
        const int need = static_cast<int>((tt * n_clients + 9) / 10);
        std::vector<bool> ta(m);
        for (size_t j = 0; j < m; ++j) {
          int pass = 0;
          for (size_t c = 0; c < n_clients; ++c) pass += individual[c][j];
          ta[j] = pass >= need;
        }
        auto built = BuildTAgreement(t, ids, Eps(e), base, tt / 10.0);
        check.Expect(built.ok() && built->members == ta, "t-agreement membership");
        if (!looser.empty()) check.Expect(Subset(ta, looser), "t-agreement monotone in t");
        looser = ta;
        if (prev_t.contains(tt)) check.Expect(Subset(prev_t[tt], ta), "t-agreement monotone in eps");
        prev_t[tt] = ta;
        if (tt == 10) check.Expect(ta == full, "full agreement is the intersection");
        if (n_clients == 1) {
          check.Expect(ta == g && g == individual[0], "single-client collapse");
        }
      }
    }
  }
  return check.Finish(absl::StrFormat("%d toy tensors (1-5 clients, 1-8 candidates)", tensors));
}

Outcome Criterion4() {
  Checker check;
  const double h = -(0.1 * std::log2(0.1) + 0.9 * std::log2(0.9));
  Matrix bsc(2, 2);
  bsc(0, 0) = 0.9;
  bsc(0, 1) = 0.1;
  bsc(1, 0) = 0.1;
  bsc(1, 1) = 0.9;
  const double bsc_err = std::abs(RashomonCapacity(bsc)->bits - (1.0 - h));
  check.Expect(bsc_err <= 1e-6, absl::StrFormat("BSC error %g", bsc_err));

  Matrix same(4, 3);
  for (size_t r = 0; r < 4; ++r) {
    same(r, 0) = 0.2;
    same(r, 1) = 0.5;
    same(r, 2) = 0.3;
  }
  const double same_bits = RashomonCapacity(same)->bits;
  check.Expect(std::abs(same_bits) <= 1e-9, absl::StrFormat("identical rows %g", same_bits));

  Matrix onehot(2, 2);
  onehot(0, 0) = 1.0;
  onehot(1, 1) = 1.0;
  const double onehot_err = std::abs(RashomonCapacity(onehot)->bits - 1.0);
  check.Expect(onehot_err <= 1e-9, absl::StrFormat("one-hot error %g", onehot_err));

  CounterRng rng(DeriveSeed({4}));
  double worst_dup = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix w(5, 4);
    for (size_t x = 0; x < 5; ++x) {
      const auto row = rng.Dirichlet(trial % 2 == 0 ? 1.0 : 0.3, 4);
      std::copy(row.begin(), row.end(), w.Row(x).begin());
    }
    const double rc = RashomonCapacity(w)->bits;
    check.Expect(rc >= 0.0 && rc <= 2.0 + 1e-12, absl::StrFormat("rc %g out of bounds", rc));
    Matrix dup(6, 4);
    for (size_t x = 0; x < 6; ++x) {
      const size_t src = x < 5 ? x : rng.UniformInt(5);
      std::copy(w.Row(src).begin(), w.Row(src).end(), dup.Row(x).begin());
    }
    const double diff = std::abs(RashomonCapacity(dup)->bits - rc);
    worst_dup = std::max(worst_dup, diff);
    check.Expect(diff <= 1e-9, absl::StrFormat("duplicate changed rc by %g", diff));
  }
  return check.Finish(absl::StrFormat(
      "BSC err %.2g, identical %.2g, one-hot err %.2g, 200 random 5x4, max dup diff %.2g",
      bsc_err, same_bits, onehot_err, worst_dup));
}

Outcome Criterion5() {
  Checker check;
  int cases = 0;
  for (size_t m = 1; m <= 12; ++m) {
    for (size_t k = 0; k <= m; ++k) {
      std::vector<int> votes(m, 0);
      for (size_t i = 0; i < k; ++i) votes[i] = 1;
      size_t differing = 0;
      for (size_t a = 0; a < m; ++a) {
        for (size_t b = 0; b < m; ++b) differing += votes[a] != votes[b];
      }
      const double oracle = 2.0 * static_cast<double>(differing) / static_cast<double>(m * m);
      check.Expect(DisagreementFromCounts(k, m) == oracle,
                   absl::StrFormat("k=%d m=%d", k, m));
      ++cases;
    }
  }
  return check.Finish(absl::StrFormat("%d (k, m) pairs", cases));
}

Outcome Criterion6() {
  Checker check;
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto [model, batch] = testing::RandomModelAndBatch(DeriveSeed({6, seed}));
    const double err = testing::GradientCheckError(model, batch);
    worst = std::max(worst, err);
    check.Expect(err <= 1e-5, absl::StrFormat("seed %d error %g", seed, err));
  }
  return check.Finish(absl::StrFormat("100 pairs, max relative error %.3g", worst));
}

FederationData FromTrains(const std::vector<Batch>& trains, int d_out) {
  FederationData fed;
  fed.d_in = static_cast<int>(trains[0].features.cols());
  fed.d_out = d_out;
  for (size_t c = 0; c < trains.size(); ++c) {
    ClientShard s;
    s.client_id = static_cast<int>(c);
    s.train = trains[c];
    s.validation = trains[c];
    s.test = trains[c];
    fed.total_test_count += s.test.size();
    fed.shards.push_back(std::move(s));
  }
  return fed;
}

Outcome Criterion7() {
  Checker check;
  double worst = 0.0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    auto [model, batch] = testing::RandomModelAndBatch(DeriveSeed({7, seed}));
    const int d_out = static_cast<int>(model.arch().d_out);
    FedConfig cfg;
    cfg.lr = 0.07;
    cfg.batch_size = 1 << 20;
    cfg.model = model.arch().kind;
    cfg.hidden_units = static_cast<int>(model.arch().d_hidden);
    auto lg = LossAndGrad(model, batch);

    // Single client, one local epoch of full-batch SGD: one centralized step.
    auto avg = FedRound(model, FromTrains({batch}, d_out), cfg, 0);
    for (size_t j = 0; j < lg->grad.size(); ++j) {
      const double diff = std::abs(avg->weights()[j] - (model.weights()[j] - 0.07 * lg->grad[j]));
      worst = std::max(worst, diff);
      check.Expect(diff <= 1e-12, "single-client FedAvg");
    }

    // FedSGD with two equal-size clients: step along the mean gradient.
    Batch second = batch;
    CounterRng rng(DeriveSeed({7, seed, 2}));
    for (size_t r = 0; r < second.size(); ++r) {
      for (double& v : second.features.Row(r)) v += rng.Normal();
    }
    for (int& y : second.labels) y = static_cast<int>(rng.UniformInt(d_out));
    cfg.algorithm = FedAlgorithm::kFedSgd;
    auto sgd = FedRound(model, FromTrains({batch, second}, d_out), cfg, 0);
    auto lg2 = LossAndGrad(model, second);
    for (size_t j = 0; j < lg->grad.size(); ++j) {
      const double hand = model.weights()[j] - 0.07 * (0.5 * lg->grad[j] + 0.5 * lg2->grad[j]);
      const double diff = std::abs(sgd->weights()[j] - hand);
      worst = std::max(worst, diff);
      check.Expect(diff <= 1e-12, "two-client FedSGD");
    }
  }
  return check.Finish(absl::StrFormat("20 models, max elementwise diff %.3g", worst));
}

Outcome Criterion8() {
  Checker check;
  CounterRng rng(DeriveSeed({8}));
  const std::vector<double> qs = {0.25, 0.5, 0.75, 0.9};
  double worst_q = 0.0;
  for (int d = 0; d < 20; ++d) {
    const BucketSpec spec{0.0, 1.0, 50 + 50 * (d % 5)};
    std::vector<double> values(1 + rng.UniformInt(2000));
    const double shape = 0.2 + 3.0 * rng.Uniform();
    for (double& v : values) v = std::pow(rng.Uniform(), shape);
    // Split across a few clients to exercise aggregation too.
    std::vector<NoisyHistogram> hs;
    const size_t parts = 1 + d % 4;
    for (size_t p = 0; p < parts; ++p) {
      std::vector<double> chunk;
      for (size_t i = p; i < values.size(); i += parts) chunk.push_back(values[i]);
      hs.push_back(*ExactHistogram(BinValues(chunk, spec)->counts, spec, static_cast<int>(p)));
    }
    auto cdf = Aggregate(hs);
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    for (double q : qs) {
      const size_t rank = static_cast<size_t>(std::ceil(q * sorted.size()));
      const double exact = sorted[std::max<size_t>(rank, 1) - 1];
      const double err = std::abs(*DpQuantile(*cdf, q) - exact);
      worst_q = std::max(worst_q, err / spec.width());
      check.Expect(err <= spec.width() + 1e-12, absl::StrFormat("dataset %d q %g", d, q));
    }
  }

  // The seed is fixed in advance and not searched over.
  CounterRng noise_rng(DeriveSeed({8, 100000}));
  const double tv = testing::GeometricNoiseTv(noise_rng, 0.1, 100000);
  check.Expect(tv < 0.01, absl::StrFormat("TV %.4f at 1e5 draws", tv));
  CounterRng big_rng(DeriveSeed({8, 1000000}));
  const double tv_big = testing::GeometricNoiseTv(big_rng, 0.1, 1000000);

  int64_t lo = INT64_MAX, hi = INT64_MIN;
  const int64_t cap = 40;
  for (int h = 0; h < 200; ++h) {
    std::vector<int64_t> counts(100);
    for (auto& c : counts) c = static_cast<int64_t>(rng.UniformInt(cap + 1));
    const double eps = h % 2 == 0 ? 0.1 : 1.0;
    auto noisy = Privatize(counts, BucketSpec{0.0, 1.0, 100}, eps, cap, DeriveSeed({8, 7, uint64_t(h)}));
    for (int64_t c : noisy->counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  check.Expect(lo >= 0 && hi <= cap, "noisy counts outside [0, cap]");
  return check.Finish(absl::StrFormat(
      "quantile err <= %.2f buckets; TV(1e5) = %.4f, TV(1e6) = %.4f; counts in [%d, %d], cap %d",
      worst_q, tv, tv_big, lo, hi, cap));
}

using Csv = std::vector<std::vector<std::string>>;

Csv ReadCsv(const fs::path& path) {
  Csv rows;
  auto text = ReadFile(path);
  if (!text.ok()) return rows;
  for (absl::string_view line : absl::StrSplit(*text, '\n', absl::SkipEmpty())) {
    rows.emplace_back(absl::StrSplit(line, ','));
  }
  return rows;
}

double ToDouble(const std::string& s) {
  double v = 0.0;
  return absl::SimpleAtod(s, &v) ? v : std::nan("");
}

std::string Criterion9Config(uint64_t seed) {
  return absl::StrFormat(R"({
    "seed": %d,
    "data": {"source": "synthetic",
             "synthetic": {"n_samples": 20000, "d_in": 10, "d_out": 2, "separation": 1.5},
             "partition": {"n_clients": 20, "alpha": 0.5}},
    "pool": {"n_seeds": 25, "participation_ratios": [0.5, 1.0], "local_epochs": [1, 2],
             "training": {"rounds": 20, "lr": 0.1, "batch_size": 32}},
    "rashomon": {"t_values": [0.6, 0.75, 0.9], "individual_clients": 10},
    "metrics": {"path": "trusted"}
  })", seed);
}

Outcome Criterion9(const fs::path& scratch, int workers) {
  Checker check;
  int seeds_with_outlier = 0;
  int ordering_violations = 0;
  int cells = 0;
  std::string per_seed;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = ParseExperimentConfig(Criterion9Config(seed));
    if (!cfg.ok()) return {false, std::string(cfg.status().message())};
    const fs::path dir = scratch / absl::StrCat("criterion9_seed", seed);
    auto run = RunPipeline(*cfg, RunOptions{"run-all", false, workers, dir});
    if (!run.ok()) return {false, std::string(run.status().message())};

    // ratios.csv: definition,t,client,epsilon,set_size,pool_size,ratio
    std::map<std::string, std::map<double, double>> ratio;
    for (const auto& row : ReadCsv(dir / "sets" / "ratios.csv")) {
      if (row[0] == "definition" || row[0] == "individual") continue;
      ratio[row[0] == "global" ? "global" : "t=" + row[1]][ToDouble(row[3])] = ToDouble(row[6]);
    }
    check.Expect(ratio.size() == 4, "missing ratio rows");
    int seed_violations = 0;
    for (const auto& [name, by_eps] : ratio) {
      double prev = -1.0;
      for (const auto& [e, r] : by_eps) {
        check.Expect(r >= prev, absl::StrFormat("seed %d %s ratio decreases at eps %g", seed, name, e));
        prev = r;
        if (name != "global") {
          ++cells;
          if (r > ratio["global"][e]) {
            ++seed_violations;
            check.Expect(false, absl::StrFormat("seed %d %s ratio %g > global %g at eps %g",
                                                seed, name, r, ratio["global"][e], e));
          }
        }
      }
    }
    ordering_violations += seed_violations;

    // Median disagreement per series and epsilon.
    std::map<double, std::pair<double, double>> band;
    std::map<double, std::vector<double>> clients;
    for (const auto& row : ReadCsv(dir / "report" / "disagreement_median.csv")) {
      if (row[0] == "series") continue;
      const double e = ToDouble(row[1]);
      const double y = ToDouble(row[2]);
      if (absl::StartsWith(row[0], "client")) {
        clients[e].push_back(y);
      } else if (absl::EndsWith(row[0], "trusted")) {
        auto [it, fresh] = band.try_emplace(e, y, y);
        it->second.first = std::min(it->second.first, y);
        it->second.second = std::max(it->second.second, y);
      }
    }
    int outside = 0;
    double max_median = 0.0;
    for (const auto& [e, ys] : clients) {
      for (double y : ys) {
        outside += y < band[e].first || y > band[e].second;
        max_median = std::max(max_median, y);
      }
    }
    seeds_with_outlier += outside > 0;
    absl::StrAppend(&per_seed,
                    absl::StrFormat("; seed %d: %d cells t > global, %d client medians outside "
                                    "band, largest client median %g",
                                    seed, seed_violations, outside, max_median));
  }
  check.Expect(seeds_with_outlier >= 1, "no client median outside the global band");
  return check.Finish(absl::StrFormat(
      "(a) %d of %d t-agreement cells exceed global; (c) %d of 5 seeds with an outlying client%s",
      ordering_violations, cells, seeds_with_outlier, per_seed));
}

std::map<std::string, std::string> CsvContents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().extension() == ".csv") {
      out[fs::relative(e.path(), dir).string()] = *ReadFile(e.path());
    }
  }
  return out;
}

Outcome Criterion10(const fs::path& scratch, int workers, const fs::path& config_path) {
  Checker check;
  auto text = ReadFile(config_path);
  if (!text.ok()) return {false, std::string(text.status().message())};
  auto cfg = ParseExperimentConfig(*text);
  if (!cfg.ok()) return {false, std::string(cfg.status().message())};
  const fs::path a = scratch / "criterion10_a";
  const fs::path b = scratch / "criterion10_b";
  const fs::path staged = scratch / "criterion10_staged";
  for (const fs::path& p : {a, b, staged}) fs::remove_all(p);
  check.Expect(RunPipeline(*cfg, RunOptions{"run-all", false, workers, a}).ok(), "run-all a");
  check.Expect(RunPipeline(*cfg, RunOptions{"run-all", false, workers, b}).ok(), "run-all b");
  for (const std::string& stage : StageNames()) {
    if (stage == "run-all") continue;
    check.Expect(RunPipeline(*cfg, RunOptions{stage, false, workers, staged}).ok(), stage);
  }
  // A second run-all over an existing directory must reuse every stage.
  auto cached = RunPipeline(*cfg, RunOptions{"run-all", false, workers, a});
  check.Expect(cached.ok(), "cached run-all");
  if (cached.ok()) {
    for (const StageOutcome& s : cached->stages) check.Expect(s.cached, s.stage + " not cached");
  }
  const auto ca = CsvContents(a);
  const auto cb = CsvContents(b);
  const auto cs = CsvContents(staged);
  check.Expect(!ca.empty(), "no CSV outputs");
  check.Expect(ca == cb, "run-all outputs differ");
  check.Expect(ca == cs, "staged outputs differ from run-all");
  return check.Finish(absl::StrFormat("%d CSV files compared across two run-all and one staged run",
                                      ca.size()));
}

struct Criterion {
  int id;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace fedrash

int main(int argc, char** argv) {
  using namespace fedrash;
  CLI::App app{"Acceptance suite"};
  std::vector<int> only;
  int workers = 1;
  std::string scratch = (fs::temp_directory_path() / "fedrash_acceptance").string();
  std::string config = "configs/synthetic.json";
  app.add_option("--criteria", only, "Subset of criteria to run")->delimiter(',');
  app.add_option("--workers", workers, "Worker threads for pipeline criteria");
  app.add_option("--scratch", scratch, "Directory for pipeline outputs");
  app.add_option("--config", config, "Experiment config for the determinism criterion");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, 10, Criterion1},
      {2, 10, Criterion2},
      {3, 5, Criterion3},
      {4, 5, Criterion4},
      {5, 1, Criterion5},
      {6, 30, Criterion6},
      {7, 5, Criterion7},
      {8, 60, Criterion8},
      {9, 15 * 60, [&] { return Criterion9(scratch, workers); }},
      {10, 20 * 60, [&] { return Criterion10(scratch, workers, config); }},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out = c.run();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.budget_seconds) {
      out.pass = false;
      out.detail += absl::StrFormat("; over the %gs budget", c.budget_seconds);
    }
    failed += !out.pass;
    std::printf("%s criterion %d: %s [%.2fs]\n", out.pass ? "PASS" : "FAIL", c.id,
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
