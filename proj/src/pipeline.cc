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

#include "fedrash/pipeline.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "absl/strings/str_format.h"
#include "fedrash/csv.h"
#include "fedrash/data.h"
#include "fedrash/dp_histogram.h"
#include "fedrash/fairness.h"
#include "fedrash/federation.h"
#include "fedrash/file_util.h"
#include "fedrash/multiplicity.h"
#include "fedrash/parallel.h"
#include "fedrash/prediction.h"
#include "fedrash/rashomon.h"
#include "fedrash/rng.h"
#include "fedrash/status_macros.h"
#include "fedrash/svg.h"

namespace fedrash {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kArtifactFormat[] = "fedrash-artifacts-1";
constexpr char kRecordFile[] = "stage.json";
constexpr int kExtraRoundLimit = 2;

struct Context {
  const ExperimentConfig& cfg;
  fs::path out;
  int workers = 1;
  std::map<std::string, std::string> keys;
};

using StageFn = std::function<absl::Status(Context&, const fs::path& dir)>;

struct StageDef {
  std::string name;
  std::string dir;
  std::vector<std::string> upstream;
  StageFn run;
};

std::string HashJson(const json& j) { return Sha256Hex(j.dump()); }

std::string Num(double v) { return FormatDouble(v); }

absl::Status WriteJson(const fs::path& path, const json& j) {
  return WriteFileAtomic(path, j.dump(2) + "\n");
}

absl::StatusOr<json> ReadJson(const fs::path& path) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    return absl::DataLossError(absl::StrFormat("%s is not valid JSON", path.string()));
  }
  return j;
}

absl::StatusOr<std::map<std::string, std::string>> HashOutputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  std::error_code ec;
  for (auto it = fs::recursive_directory_iterator(dir, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const std::string rel = fs::relative(it->path(), dir).generic_string();
    if (rel == kRecordFile || rel.ends_with(".tmp")) continue;
    FEDRASH_ASSIGN_OR_RETURN(std::string bytes, ReadFile(it->path()));
    out[rel] = Sha256Hex(bytes);
  }
  if (ec) return absl::InternalError(absl::StrFormat("cannot list %s", dir.string()));
  return out;
}

// A stage is current when its record carries the expected key and every
// recorded output is still present and unchanged.
bool IsCurrent(const fs::path& dir, const std::string& key) {
  auto record = ReadJson(dir / kRecordFile);
  if (!record.ok() || record->value("key", "") != key) return false;
  auto outputs = HashOutputs(dir);
  if (!outputs.ok()) return false;
  return (*record)["outputs"] == json(*outputs);
}

absl::Status WriteRecord(const fs::path& dir, const std::string& stage,
                         const std::string& key) {
  FEDRASH_ASSIGN_OR_RETURN(auto outputs, HashOutputs(dir));
  return WriteJson(dir / kRecordFile, {{"stage", stage}, {"key", key}, {"outputs", outputs}});
}

absl::Status ResetDirectory(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
  if (ec) return absl::InternalError(absl::StrFormat("cannot clear %s", dir.string()));
  return EnsureDirectory(dir);
}

std::vector<int> EvalClients(const ExperimentConfig& cfg, const FederationData& data) {
  if (!cfg.rashomon.eval_clients.empty()) {
    std::vector<int> ids = cfg.rashomon.eval_clients;
    std::sort(ids.begin(), ids.end());
    return ids;
  }
  std::vector<int> ids;
  for (const ClientShard& s : data.shards) ids.push_back(s.client_id);
  return ids;
}

bool HasDefinition(const ExperimentConfig& cfg, std::string_view name) {
  const auto& defs = cfg.rashomon.definitions;
  return std::find(defs.begin(), defs.end(), name) != defs.end();
}

std::string CellName(const std::string& definition, double epsilon, std::optional<double> t) {
  if (t.has_value()) {
    return absl::StrFormat("%s_t%s_eps%s", definition, Num(*t), Num(epsilon));
  }
  return absl::StrFormat("%s_eps%s", definition, Num(epsilon));
}

// ---------------------------------------------------------------- partition

absl::Status RunPartition(Context& ctx, const fs::path& dir) {
  const DataSection& d = ctx.cfg.data;
  const uint64_t seed = ctx.cfg.seed;
  Dataset ds;
  if (d.source == "synthetic") {
    FEDRASH_ASSIGN_OR_RETURN(
        ds, SynthGaussian(d.n_samples, d.d_in, d.d_out, d.separation, DeriveSeed({seed, 1, 0})));
    if (d.sensitive_bias.has_value()) {
      FEDRASH_RETURN_IF_ERROR(
          AttachSyntheticSensitive(ds, *d.sensitive_bias, DeriveSeed({seed, 1, 1})));
    }
  } else {
    FEDRASH_ASSIGN_OR_RETURN(CsvSchema schema,
                             LoadSchemaFile(ctx.cfg.base_dir / d.schema_path));
    FEDRASH_ASSIGN_OR_RETURN(ds, LoadCsv(ctx.cfg.base_dir / d.csv_path, d.label_column,
                                         d.sensitive_column, schema));
  }
  PartitionOptions options;
  options.n_clients = d.n_clients;
  options.alpha = d.alpha;
  options.splits = d.splits;
  options.seed = DeriveSeed({seed, 1, 2});
  options.max_retries = d.max_retries;
  FEDRASH_ASSIGN_OR_RETURN(FederationData fed, PartitionDirichlet(ds, options));
  return SaveFederationData(fed, dir);
}

// ---------------------------------------------------------------- train-pool

PoolGrid GridFor(const ExperimentConfig& cfg) {
  PoolGrid grid;
  for (int i = 0; i < cfg.pool.n_seeds; ++i) {
    grid.seeds.push_back(DeriveSeed({cfg.seed, 2, static_cast<uint64_t>(i)}));
  }
  grid.participation_ratios = cfg.pool.participation_ratios;
  grid.local_epochs = cfg.pool.local_epochs;
  grid.base = cfg.pool.training;
  return grid;
}

absl::Status RunTrainPool(Context& ctx, const fs::path& dir) {
  FEDRASH_ASSIGN_OR_RETURN(FederationData data, LoadFederationData(ctx.out / "partition"));
  const PoolGrid grid = GridFor(ctx.cfg);
  GenerateOptions options;
  options.workers = ctx.workers;
  auto pool = GeneratePool(data, grid, dir, options);
  if (absl::IsFailedPrecondition(pool.status())) {
    FEDRASH_RETURN_IF_ERROR(ResetDirectory(dir));
    pool = GeneratePool(data, grid, dir, options);
  }
  return pool.status();
}

// ---------------------------------------------------------------- build-sets

absl::Status RunBuildSets(Context& ctx, const fs::path& dir) {
  const ExperimentConfig& cfg = ctx.cfg;
  FEDRASH_ASSIGN_OR_RETURN(FederationData data, LoadFederationData(ctx.out / "partition"));
  FEDRASH_ASSIGN_OR_RETURN(CandidatePool pool, LoadPool(ctx.out / "pool"));
  const std::vector<int> eval = EvalClients(cfg, data);
  FEDRASH_ASSIGN_OR_RETURN(PredictionTensor tensor,
                           EvaluatePool(pool, data, eval, ctx.workers));
  FEDRASH_RETURN_IF_ERROR(SavePredictionCache(tensor, dir / "predictions"));
  FEDRASH_ASSIGN_OR_RETURN(size_t baseline, SelectBaseline(tensor, eval));

  std::vector<int> individual;
  if (HasDefinition(cfg, "individual")) {
    individual = eval;
    const size_t k = std::min<size_t>(cfg.rashomon.individual_clients, individual.size());
    CounterRng rng = CounterRng(DeriveSeed({cfg.seed, 3})).Split(RngStream::kIndividualClients);
    for (size_t i = 0; i < k; ++i) {
      const size_t j = i + static_cast<size_t>(rng.UniformInt(individual.size() - i));
      std::swap(individual[i], individual[j]);
    }
    individual.resize(k);
    std::sort(individual.begin(), individual.end());
  }

  json cells = json::array();
  std::string ratios = FormatCsvRow({"definition", "t", "client", "epsilon", "set_size",
                                     "pool_size", "rashomon_ratio_empirical"});
  auto add_ratio = [&](const RashomonSelection& sel, const std::string& def,
                       const std::string& t, const std::string& client, double eps) {
    ratios += FormatCsvRow({def, t, client, Num(eps), std::to_string(sel.size()),
                            std::to_string(pool.size()),
                            Num(RashomonRatio(sel, pool.size()))});
  };
  for (double eps : cfg.rashomon.epsilons) {
    const std::vector<PerformanceConstraint> cons = {{PerformanceMetric::kAccuracy, eps}};
    if (HasDefinition(cfg, "global")) {
      FEDRASH_ASSIGN_OR_RETURN(
          RashomonSelection sel,
          BuildGlobal(tensor, eval, cons, baseline, cfg.rashomon.aggregation));
      add_ratio(sel, "global", "", "", eps);
      cells.push_back({{"name", CellName("global", eps, std::nullopt)},
                       {"definition", "global"},
                       {"epsilon", eps},
                       {"selections", json::array({sel.ToJson(true)})}});
    }
    if (HasDefinition(cfg, "t_agreement")) {
      for (double t : cfg.rashomon.t_values) {
        FEDRASH_ASSIGN_OR_RETURN(RashomonSelection sel,
                                 BuildTAgreement(tensor, eval, cons, baseline, t));
        add_ratio(sel, "t_agreement", Num(t), "", eps);
        cells.push_back({{"name", CellName("t_agreement", eps, t)},
                         {"definition", "t_agreement"},
                         {"epsilon", eps},
                         {"t", t},
                         {"selections", json::array({sel.ToJson(true)})}});
      }
    }
    if (!individual.empty()) {
      json sels = json::array();
      for (int c : individual) {
        FEDRASH_ASSIGN_OR_RETURN(RashomonSelection sel,
                                 BuildIndividual(tensor, c, cons, baseline));
        add_ratio(sel, "individual", "", std::to_string(c), eps);
        sels.push_back(sel.ToJson(true));
      }
      cells.push_back({{"name", CellName("individual", eps, std::nullopt)},
                       {"definition", "individual"},
                       {"epsilon", eps},
                       {"selections", sels}});
    }
  }
  json doc = {{"baseline_index", baseline},
              {"pool_size", pool.size()},
              {"eval_clients", eval},
              {"individual_clients", individual},
              {"cells", cells}};
  FEDRASH_RETURN_IF_ERROR(WriteJson(dir / "selections.json", doc));
  return WriteFileAtomic(dir / "ratios.csv", ratios);
}

// ---------------------------------------------------------------- metrics

std::optional<SampleMetric> SampleMetricFor(std::string_view name) {
  if (name == "disagreement") return SampleMetric::kDisagreement;
  if (name == "vpr") return SampleMetric::kVpr;
  if (name == "std") return SampleMetric::kStd;
  if (name == "rashomon_capacity") return SampleMetric::kRc;
  return std::nullopt;
}

BucketSpec BucketsFor(SampleMetric metric, int d_out, int n_buckets) {
  switch (metric) {
    case SampleMetric::kStd:
      return {0.0, 0.5, n_buckets};
    case SampleMetric::kRc:
      return {0.0, std::log2(static_cast<double>(d_out)), n_buckets};
    case SampleMetric::kVpr:
    case SampleMetric::kDisagreement:
      return {0.0, 1.0, n_buckets};
  }
  return {0.0, 1.0, n_buckets};
}

struct CellOutput {
  std::string csv;
  std::vector<CsvRow> rows;
  // Per-sample metric name -> exact and optional DP aggregate CDF.
  std::map<std::string, std::pair<AggregatedCdf, std::optional<AggregatedCdf>>> cdfs;
};

class RowSink {
 public:
  explicit RowSink(CellOutput& out) : out_(out) {}
  void Add(const std::string& metric, const std::string& scope, const std::string& statistic,
           double value) {
    out_.rows.push_back({metric, scope, statistic, Num(value)});
  }

 private:
  CellOutput& out_;
};

absl::Status AddPercentiles(RowSink& sink, const std::string& metric, const std::string& scope,
                            const std::string& prefix, std::span<const double> values,
                            const std::vector<double>& percentiles, bool exponentiate) {
  std::vector<double> v(values.begin(), values.end());
  if (exponentiate) {
    for (double& x : v) x = std::exp2(x);
  }
  FEDRASH_ASSIGN_OR_RETURN(auto table, PercentileSummary(v, percentiles));
  for (const PercentileRow& row : table) {
    sink.Add(metric, scope, absl::StrFormat("%s_p%s", prefix, Num(row.percentile)), row.value);
  }
  return absl::OkStatus();
}

// Global and t-agreement cells: per-client values plus the federated view,
// and the pooled centralized view as a reference.
absl::Status SharedCell(const Context& ctx, const PredictionTensor& tensor,
                        const RashomonSelection& sel, size_t cell_index, bool want_cdf,
                        CellOutput& out) {
  const MetricsSection& m = ctx.cfg.metrics;
  RowSink sink(out);
  const size_t pool_size = tensor.num_candidates();
  sink.Add("rashomon_ratio", "federated", "empirical", RashomonRatio(sel, pool_size));
  sink.Add("set_size", "federated", "count", static_cast<double>(sel.size()));
  if (sel.empty()) return absl::OkStatus();
  const std::vector<int>& clients = sel.client_ids;

  for (size_t mi = 0; mi < m.metrics.size(); ++mi) {
    const std::string& name = m.metrics[mi];
    if (name == "ambiguity" || name == "discrepancy") {
      const bool amb = name == "ambiguity";
      std::vector<LocalValue> locals;
      for (int c : clients) {
        FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(c));
        FEDRASH_ASSIGN_OR_RETURN(double v, amb ? AmbiguityLocal(tensor, c, sel)
                                               : DiscrepancyLocal(tensor, c, sel));
        locals.push_back({v, tensor.n_test(idx)});
        sink.Add(name, std::to_string(c), "value", v);
      }
      sink.Add(name, "federated", "value",
               amb ? AmbiguityGlobal(locals) : DiscrepancyFederated(locals));
      FEDRASH_ASSIGN_OR_RETURN(double pooled, amb ? PooledAmbiguity(tensor, clients, sel)
                                                  : PooledDiscrepancy(tensor, clients, sel));
      sink.Add(name, "centralized", "value", pooled);
      continue;
    }
    const SampleMetric metric = *SampleMetricFor(name);
    if (metric == SampleMetric::kDisagreement && !tensor.is_binary()) continue;
    SampleMetricOptions options;
    options.tau = m.tau;
    options.capacity = m.capacity;
    const BucketSpec spec = BucketsFor(metric, tensor.d_out(), m.n_buckets);
    const bool exp_rc = metric == SampleMetric::kRc && m.exponentiated_capacity;
    std::vector<double> pooled;
    std::vector<NoisyHistogram> exact;
    std::vector<NoisyHistogram> noisy;
    for (int c : clients) {
      FEDRASH_ASSIGN_OR_RETURN(std::vector<double> values,
                               PerSampleMetric(tensor, c, sel, metric, options));
      FEDRASH_RETURN_IF_ERROR(AddPercentiles(sink, name, std::to_string(c), "trusted", values,
                                             m.percentiles, false));
      pooled.insert(pooled.end(), values.begin(), values.end());
      FEDRASH_ASSIGN_OR_RETURN(BinResult bins, BinValues(values, spec));
      FEDRASH_ASSIGN_OR_RETURN(NoisyHistogram h, ExactHistogram(bins.counts, spec, c));
      exact.push_back(std::move(h));
      if (m.path != MetricPath::kTrusted) {
        std::optional<uint64_t> seed;
        if (m.dp_deterministic_seed) {
          seed = DeriveSeed({ctx.cfg.seed, 4, cell_index, mi, static_cast<uint64_t>(c)});
        }
        FEDRASH_ASSIGN_OR_RETURN(
            NoisyHistogram p,
            Privatize(bins.counts, spec, m.dp_epsilon,
                      static_cast<int64_t>(values.size()), seed, c));
        noisy.push_back(std::move(p));
      }
    }
    if (m.path != MetricPath::kDp) {
      FEDRASH_RETURN_IF_ERROR(
          AddPercentiles(sink, name, "federated", "trusted", pooled, m.percentiles, false));
      if (exp_rc) {
        FEDRASH_RETURN_IF_ERROR(AddPercentiles(sink, name + "_exp", "federated", "trusted",
                                               pooled, m.percentiles, true));
      }
    }
    FEDRASH_ASSIGN_OR_RETURN(AggregatedCdf exact_cdf, Aggregate(exact));
    std::optional<AggregatedCdf> dp_cdf;
    if (m.path != MetricPath::kTrusted) {
      FEDRASH_ASSIGN_OR_RETURN(dp_cdf, Aggregate(noisy));
      if (dp_cdf->empty) {
        sink.Add(name, "federated", "dp_empty", 1.0);
      } else {
        for (double p : m.percentiles) {
          FEDRASH_ASSIGN_OR_RETURN(double q, DpQuantile(*dp_cdf, p / 100.0));
          sink.Add(name, "federated", absl::StrFormat("dp_p%s", Num(p)), q);
        }
      }
      FEDRASH_ASSIGN_OR_RETURN(double sup, CdfSupDistance(*dp_cdf, exact_cdf));
      sink.Add(name, "federated", "dp_cdf_sup_error", sup);
    }
    if (want_cdf) out.cdfs[name] = {std::move(exact_cdf), std::move(dp_cdf)};
  }
  return absl::OkStatus();
}

// Individual cells: every value is computed by the client on its own data.
absl::Status IndividualCell(const Context& ctx, const PredictionTensor& tensor,
                            const std::vector<RashomonSelection>& sels, CellOutput& out) {
  const MetricsSection& m = ctx.cfg.metrics;
  RowSink sink(out);
  for (const RashomonSelection& sel : sels) {
    const int c = sel.definition.client_id;
    const std::string scope = std::to_string(c);
    sink.Add("rashomon_ratio", scope, "empirical", RashomonRatio(sel, tensor.num_candidates()));
    sink.Add("set_size", scope, "count", static_cast<double>(sel.size()));
    if (sel.empty()) continue;
    for (const std::string& name : m.metrics) {
      if (name == "ambiguity") {
        FEDRASH_ASSIGN_OR_RETURN(double v, AmbiguityLocal(tensor, c, sel));
        sink.Add(name, scope, "local", v);
      } else if (name == "discrepancy") {
        FEDRASH_ASSIGN_OR_RETURN(double v, DiscrepancyLocal(tensor, c, sel));
        sink.Add(name, scope, "local", v);
      } else {
        const SampleMetric metric = *SampleMetricFor(name);
        if (metric == SampleMetric::kDisagreement && !tensor.is_binary()) continue;
        SampleMetricOptions options;
        options.tau = m.tau;
        options.capacity = m.capacity;
        FEDRASH_ASSIGN_OR_RETURN(std::vector<double> values,
                                 PerSampleMetric(tensor, c, sel, metric, options));
        FEDRASH_RETURN_IF_ERROR(
            AddPercentiles(sink, name, scope, "local", values, m.percentiles, false));
      }
    }
  }
  return absl::OkStatus();
}

struct CellSpec {
  std::string name;
  std::string definition;
  double epsilon = 0;
  std::optional<double> t;
  std::vector<RashomonSelection> selections;
};

absl::StatusOr<std::vector<CellSpec>> LoadCells(const fs::path& sets_dir) {
  FEDRASH_ASSIGN_OR_RETURN(json doc, ReadJson(sets_dir / "selections.json"));
  std::vector<CellSpec> cells;
  try {
    for (const json& c : doc.at("cells")) {
      CellSpec cell;
      cell.name = c.at("name").get<std::string>();
      cell.definition = c.at("definition").get<std::string>();
      cell.epsilon = c.at("epsilon").get<double>();
      if (c.contains("t")) cell.t = c.at("t").get<double>();
      for (const json& s : c.at("selections")) {
        FEDRASH_ASSIGN_OR_RETURN(RashomonSelection sel, RashomonSelection::FromJson(s));
        cell.selections.push_back(std::move(sel));
      }
      cells.push_back(std::move(cell));
    }
  } catch (const json::exception& e) {
    return absl::DataLossError(absl::StrFormat("bad selections.json: %s", e.what()));
  }
  return cells;
}

absl::Status RunMetrics(Context& ctx, const fs::path& dir) {
  FEDRASH_ASSIGN_OR_RETURN(PredictionTensor tensor,
                           LoadPredictionCache(ctx.out / "sets" / "predictions"));
  FEDRASH_ASSIGN_OR_RETURN(std::vector<CellSpec> cells, LoadCells(ctx.out / "sets"));

  // CDF tables come from the widest shared cell: the largest epsilon, global
  // when available.
  std::optional<size_t> cdf_cell;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].definition == "individual") continue;
    if (!cdf_cell || cells[i].epsilon > cells[*cdf_cell].epsilon ||
        (cells[i].epsilon == cells[*cdf_cell].epsilon && cells[i].definition == "global" &&
         cells[*cdf_cell].definition != "global")) {
      cdf_cell = i;
    }
  }

  std::vector<CellOutput> outputs(cells.size());
  FEDRASH_RETURN_IF_ERROR(ParallelFor(cells.size(), ctx.workers, [&](size_t i) -> absl::Status {
    const CellSpec& cell = cells[i];
    absl::Status st = cell.definition == "individual"
                          ? IndividualCell(ctx, tensor, cell.selections, outputs[i])
                          : SharedCell(ctx, tensor, cell.selections.front(), i,
                                       cdf_cell == i, outputs[i]);
    if (!st.ok()) {
      return absl::Status(st.code(), absl::StrFormat("cell %s: %s", cell.name, st.message()));
    }
    return absl::OkStatus();
  }));

  const CsvRow header = {"metric", "scope", "statistic", "value"};
  std::string summary = FormatCsvRow(
      {"cell", "definition", "t", "epsilon", "metric", "scope", "statistic", "value"});
  for (size_t i = 0; i < cells.size(); ++i) {
    std::string csv = FormatCsvRow(header);
    for (const CsvRow& row : outputs[i].rows) {
      csv += FormatCsvRow(row);
      CsvRow full = {cells[i].name, cells[i].definition,
                     cells[i].t ? Num(*cells[i].t) : "", Num(cells[i].epsilon)};
      full.insert(full.end(), row.begin(), row.end());
      summary += FormatCsvRow(full);
    }
    FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / (cells[i].name + ".csv"), csv));
  }
  FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / "summary.csv", summary));

  if (cdf_cell) {
    for (const auto& [name, pair] : outputs[*cdf_cell].cdfs) {
      const auto& [exact, dp] = pair;
      CsvRow head = {"bucket_upper", "exact_cdf"};
      if (dp) head.push_back("dp_cdf");
      std::string csv = FormatCsvRow(head);
      for (int b = 0; b < exact.spec.n_buckets; ++b) {
        CsvRow row = {Num(exact.spec.UpperEdge(b)), Num(exact.cdf[b])};
        if (dp) row.push_back(Num(dp->cdf[b]));
        csv += FormatCsvRow(row);
      }
      FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / ("cdf_" + name + ".csv"), csv));
    }
    FEDRASH_RETURN_IF_ERROR(
        WriteJson(dir / "cdf_source.json", {{"cell", cells[*cdf_cell].name}}));
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------- fairness

absl::Status RunFairness(Context& ctx, const fs::path& dir) {
  const ExperimentConfig& cfg = ctx.cfg;
  if (!cfg.fairness.has_value()) return absl::OkStatus();
  FEDRASH_ASSIGN_OR_RETURN(PredictionTensor tensor,
                           LoadPredictionCache(ctx.out / "sets" / "predictions"));
  FEDRASH_ASSIGN_OR_RETURN(json doc, ReadJson(ctx.out / "sets" / "selections.json"));
  const size_t baseline = doc.at("baseline_index").get<size_t>();
  const std::vector<int> eval = doc.at("eval_clients").get<std::vector<int>>();

  std::vector<RashomonSelection> global;
  for (double eps : cfg.rashomon.epsilons) {
    FEDRASH_ASSIGN_OR_RETURN(
        RashomonSelection sel,
        BuildGlobal(tensor, eval, {{PerformanceMetric::kAccuracy, eps}}, baseline,
                    cfg.rashomon.aggregation));
    global.push_back(std::move(sel));
  }
  const size_t k = static_cast<size_t>(cfg.fairness->sample_k);
  const std::optional<size_t> smallest = SmallestSufficientEpsilon(global, k);
  const size_t chosen = smallest.value_or(global.size() - 1);
  FEDRASH_ASSIGN_OR_RETURN(FairnessReport report,
                           FairnessSweep(tensor, global[chosen], k, DeriveSeed({cfg.seed, 5})));
  FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / "fairness.csv", report.ToCsv()));
  return WriteJson(dir / "selection.json",
                   {{"epsilon", cfg.rashomon.epsilons[chosen]},
                    {"set_size", global[chosen].size()},
                    {"sufficient", smallest.has_value()},
                    {"sample_k", k},
                    {"sampled", report.sampled}});
}

// ---------------------------------------------------------------- report

absl::StatusOr<std::vector<CsvRow>> ReadCsvRows(const fs::path& path) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  FEDRASH_ASSIGN_OR_RETURN(std::vector<CsvRow> rows, ParseCsv(text));
  if (rows.empty()) return absl::DataLossError(absl::StrFormat("%s is empty", path.string()));
  return rows;
}

std::optional<double> ParseNum(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Series accumulated in first-seen order.
class SeriesBuilder {
 public:
  void Add(const std::string& series, double x, double y) {
    auto [it, inserted] = index_.try_emplace(series, chart_.series.size());
    if (inserted) chart_.series.push_back({series, {}});
    chart_.series[it->second].points.emplace_back(x, y);
  }
  Chart Take(std::string title, std::string x_label, std::string y_label, bool scatter) {
    chart_.title = std::move(title);
    chart_.x_label = std::move(x_label);
    chart_.y_label = std::move(y_label);
    chart_.scatter = scatter;
    return std::move(chart_);
  }
  bool empty() const { return chart_.series.empty(); }

 private:
  Chart chart_;
  std::map<std::string, size_t> index_;
};

std::string SeriesPrefix(const std::string& definition, const std::string& t,
                         const std::string& scope) {
  if (definition == "individual") return "client " + scope;
  if (definition == "t_agreement") return "t=" + t;
  return "global";
}

absl::Status RunReport(Context& ctx, const fs::path& dir) {
  const ExperimentConfig& cfg = ctx.cfg;
  // Communication accounting: training rounds, then one round to collect
  // per-candidate accuracies and one to collect multiplicity statistics.
  std::string log = absl::StrFormat("training_rounds_per_candidate,%d\n",
                                    cfg.pool.training.rounds);
  int extra = 0;
  log += absl::StrFormat("extra_round,%d,build-sets,clients report per-candidate accuracy\n",
                         ++extra);
  log += absl::StrFormat(
      "extra_round,%d,metrics,clients report local multiplicity values and histograms\n",
      ++extra);
  if (cfg.fairness.has_value()) {
    log += absl::StrFormat(
        "extra_round,%d,fairness,group decision rates ride on the metrics round\n", extra);
  }
  log += absl::StrFormat("extra_rounds_total,%d,limit,%d\n", extra, kExtraRoundLimit);
  if (extra > kExtraRoundLimit) {
    return absl::InternalError(
        absl::StrFormat("%d extra communication rounds exceed the limit", extra));
  }
  FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / "communication.log", log));

  // Rashomon ratio against epsilon.
  {
    FEDRASH_ASSIGN_OR_RETURN(auto rows, ReadCsvRows(ctx.out / "sets" / "ratios.csv"));
    SeriesBuilder b;
    for (size_t r = 1; r < rows.size(); ++r) {
      const CsvRow& row = rows[r];
      b.Add(SeriesPrefix(row[0], row[1], row[2]), ParseNum(row[3]).value_or(NAN),
            ParseNum(row[6]).value_or(NAN));
    }
    FEDRASH_RETURN_IF_ERROR(WriteChart(
        b.Take("Empirical Rashomon ratio", "epsilon", "ratio", false), dir / "rashomon_ratio"));
  }

  // Multiplicity curves.
  FEDRASH_ASSIGN_OR_RETURN(auto summary, ReadCsvRows(ctx.out / "metrics" / "summary.csv"));
  for (const std::string& metric : cfg.metrics.metrics) {
    const bool scalar = metric == "ambiguity" || metric == "discrepancy";
    SeriesBuilder b;
    for (size_t r = 1; r < summary.size(); ++r) {
      const CsvRow& row = summary[r];
      if (row[4] != metric) continue;
      const std::string& def = row[1];
      const std::string& scope = row[5];
      const std::string& stat = row[6];
      std::string series;
      if (scalar) {
        if (def == "individual" && stat == "local") {
          series = SeriesPrefix(def, row[2], scope);
        } else if (def != "individual" && (scope == "federated" || scope == "centralized")) {
          series = SeriesPrefix(def, row[2], scope) + " " + scope;
        }
      } else {
        if (def == "individual" && stat == "local_p50") {
          series = SeriesPrefix(def, row[2], scope);
        } else if (def != "individual" && scope == "federated" &&
                   (stat == "trusted_p50" || stat == "dp_p50")) {
          series = SeriesPrefix(def, row[2], scope) + (stat == "dp_p50" ? " dp" : " trusted");
        }
      }
      if (series.empty()) continue;
      b.Add(series, ParseNum(row[3]).value_or(NAN), ParseNum(row[7]).value_or(NAN));
    }
    if (b.empty()) continue;
    const std::string stem = scalar ? metric : metric + "_median";
    FEDRASH_RETURN_IF_ERROR(WriteChart(
        b.Take(scalar ? metric : metric + " (median over samples)", "epsilon", metric, false),
        dir / stem));
  }

  // CDF tables.
  for (const std::string& metric : cfg.metrics.metrics) {
    const fs::path path = ctx.out / "metrics" / ("cdf_" + metric + ".csv");
    if (!fs::exists(path)) continue;
    FEDRASH_ASSIGN_OR_RETURN(auto rows, ReadCsvRows(path));
    SeriesBuilder b;
    for (size_t r = 1; r < rows.size(); ++r) {
      const double x = ParseNum(rows[r][0]).value_or(NAN);
      b.Add("exact", x, ParseNum(rows[r][1]).value_or(NAN));
      if (rows[r].size() > 2) b.Add("dp", x, ParseNum(rows[r][2]).value_or(NAN));
    }
    FEDRASH_RETURN_IF_ERROR(
        WriteChart(b.Take(metric + " CDF", metric, "cumulative fraction", false),
                   dir / ("cdf_" + metric)));
  }

  // Fairness scatter.
  const fs::path fairness = ctx.out / "fairness" / "fairness.csv";
  if (cfg.fairness.has_value() && fs::exists(fairness)) {
    FEDRASH_ASSIGN_OR_RETURN(auto rows, ReadCsvRows(fairness));
    SeriesBuilder b;
    for (size_t r = 1; r < rows.size(); ++r) {
      if (rows[r][4] != "ok") continue;
      const std::string series = rows[r][0] == "global" ? "global" : "client " + rows[r][0];
      b.Add(series, ParseNum(rows[r][2]).value_or(NAN), ParseNum(rows[r][3]).value_or(NAN));
    }
    FEDRASH_RETURN_IF_ERROR(WriteChart(
        b.Take("Demographic parity of sampled members", "accuracy", "dp gap", true),
        dir / "fairness_scatter"));
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------- driver

const std::vector<StageDef>& Stages() {
  static const auto* stages = new std::vector<StageDef>{
      {"partition", "partition", {}, RunPartition},
      {"train-pool", "pool", {"partition"}, RunTrainPool},
      {"build-sets", "sets", {"partition", "train-pool"}, RunBuildSets},
      {"metrics", "metrics", {"build-sets"}, RunMetrics},
      {"fairness", "fairness", {"build-sets"}, RunFairness},
      {"report", "report", {"build-sets", "metrics", "fairness"}, RunReport},
  };
  return *stages;
}

const StageDef& StageByName(const std::string& name) {
  for (const StageDef& s : Stages()) {
    if (s.name == name) return s;
  }
  return Stages().front();
}

absl::StatusOr<std::map<std::string, std::string>> ComputeKeys(const ExperimentConfig& cfg) {
  const json full = cfg.ToJson();
  std::map<std::string, std::string> keys;
  json inputs = {{"format", kArtifactFormat}, {"data", full["data"]}, {"seed", cfg.seed}};
  if (cfg.data.source == "csv") {
    FEDRASH_ASSIGN_OR_RETURN(std::string csv, ReadFile(cfg.base_dir / cfg.data.csv_path));
    FEDRASH_ASSIGN_OR_RETURN(std::string schema,
                             ReadFile(cfg.base_dir / cfg.data.schema_path));
    inputs["csv_sha256"] = Sha256Hex(csv);
    inputs["schema_sha256"] = Sha256Hex(schema);
  }
  keys["partition"] = HashJson(inputs);
  keys["train-pool"] = HashJson({{"pool", full["pool"]}, {"up", keys["partition"]}});
  keys["build-sets"] = HashJson({{"rashomon", full["rashomon"]}, {"up", keys["train-pool"]}});
  keys["metrics"] = HashJson({{"metrics", full["metrics"]}, {"up", keys["build-sets"]}});
  keys["fairness"] = HashJson({{"fairness", full.contains("fairness") ? full["fairness"] : json()},
                               {"rashomon", full["rashomon"]},
                               {"up", keys["build-sets"]}});
  keys["report"] = HashJson(
      {{"up", {keys["build-sets"], keys["metrics"], keys["fairness"]}},
       {"metrics", full["metrics"]}});
  return keys;
}

absl::Status WriteManifest(const Context& ctx) {
  json stages = json::object();
  for (const StageDef& s : Stages()) {
    const fs::path dir = ctx.out / s.dir;
    if (!IsCurrent(dir, ctx.keys.at(s.name))) continue;
    FEDRASH_ASSIGN_OR_RETURN(json record, ReadJson(dir / kRecordFile));
    stages[s.name] = {{"directory", s.dir}, {"key", record["key"]}, {"outputs", record["outputs"]}};
  }
  json manifest = {{"format", kArtifactFormat},
                   {"config", ctx.cfg.ToJson()},
                   {"stages", stages}};
  return WriteJson(ctx.out / "manifest.json", manifest);
}

}  // namespace

const std::vector<std::string>& StageNames() {
  static const auto* names = new std::vector<std::string>{
      "partition", "train-pool", "build-sets", "metrics", "fairness", "report", "run-all"};
  return *names;
}

absl::StatusOr<RunSummary> RunPipeline(const ExperimentConfig& config,
                                       const RunOptions& options) {
  const auto& names = StageNames();
  if (std::find(names.begin(), names.end(), options.stage) == names.end()) {
    return absl::InvalidArgumentError(absl::StrFormat("unknown stage '%s'", options.stage));
  }
  if (options.output.empty()) return absl::InvalidArgumentError("no output directory");
  Context ctx{config, options.output, std::max(1, options.workers), {}};
  FEDRASH_ASSIGN_OR_RETURN(ctx.keys, ComputeKeys(config));
  FEDRASH_RETURN_IF_ERROR(EnsureDirectory(ctx.out));

  std::vector<const StageDef*> plan;
  if (options.stage == "run-all") {
    for (const StageDef& s : Stages()) plan.push_back(&s);
  } else {
    const StageDef& s = StageByName(options.stage);
    for (const std::string& up : s.upstream) {
      const StageDef& u = StageByName(up);
      if (!IsCurrent(ctx.out / u.dir, ctx.keys.at(up))) {
        return absl::FailedPreconditionError(absl::StrFormat(
            "stage '%s': upstream stage '%s' is missing or was produced from a "
            "different configuration; run it first",
            s.name, up));
      }
    }
    plan.push_back(&s);
  }

  RunSummary summary;
  summary.output = ctx.out;
  for (const StageDef* s : plan) {
    const fs::path dir = ctx.out / s->dir;
    const std::string& key = ctx.keys.at(s->name);
    if (!options.force && IsCurrent(dir, key)) {
      summary.stages.push_back({s->name, true});
      continue;
    }
    // An interrupted pool store is kept so that training resumes.
    const bool resumable = s->name == "train-pool" && !options.force &&
                           !fs::exists(dir / kRecordFile);
    absl::Status st = resumable ? EnsureDirectory(dir) : ResetDirectory(dir);
    if (st.ok()) st = s->run(ctx, dir);
    if (st.ok()) st = WriteRecord(dir, s->name, key);
    if (!st.ok()) {
      return absl::Status(st.code(), absl::StrFormat("stage '%s' failed: %s", s->name,
                                                     st.message()));
    }
    summary.stages.push_back({s->name, false});
  }
  FEDRASH_RETURN_IF_ERROR(WriteManifest(ctx));
  return summary;
}

int RunCli(int argc, const char* const* argv) {
  CLI::App app{"Federated Rashomon-set multiplicity pipeline"};
  std::string config_path;
  std::string output;
  int workers = 1;
  std::string stage = "run-all";
  bool force = false;
  std::optional<uint64_t> seed;
  app.add_option("--config", config_path, "Experiment config (JSON)")->required();
  app.add_option("--output", output, "Artifact directory");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--stage", stage, "Stage to run")->check(CLI::IsMember(StageNames()));
  app.add_flag("--force", force, "Ignore cached stage outputs");
  app.add_option("--seed", seed, "Override the config's master seed");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto config = LoadExperimentConfig(config_path);
  if (!config.ok()) {
    std::cerr << "config error: " << config.status().message() << "\n";
    return 2;
  }
  if (seed.has_value()) config->seed = *seed;

  RunOptions options;
  options.stage = stage;
  options.force = force;
  options.workers = workers;
  if (!output.empty()) {
    options.output = output;
  } else if (!config->output_dir.empty()) {
    options.output = config->base_dir / config->output_dir;
  } else if (const char* env = std::getenv("FEDRASH_OUTPUT"); env != nullptr && *env != '\0') {
    options.output = env;
  } else {
    options.output = "fedrash_output";
  }

  auto summary = RunPipeline(*config, options);
  if (!summary.ok()) {
    std::cerr << "error: " << summary.status().message() << "\n";
    return 3;
  }
  for (const StageOutcome& s : summary->stages) {
    std::cout << s.stage << ": " << (s.cached ? "cached" : "done") << "\n";
  }
  std::cout << "artifacts: " << summary->output.string() << "\n";
  return 0;
}

}  // namespace fedrash
