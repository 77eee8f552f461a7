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

#include "fedrash/federation.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedrash/file_util.h"
#include "fedrash/parallel.h"
#include "fedrash/rng.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

std::string AlgorithmName(FedAlgorithm a) {
  return a == FedAlgorithm::kFedAvg ? "fedavg" : "fedsgd";
}

std::string ModelName(ArchKind k) { return k == ArchKind::kLinear ? "linear" : "mlp"; }

std::string CandidateStem(size_t index) {
  return absl::StrFormat("candidate_%d", index);
}

}  // namespace

absl::Status FedConfig::Validate() const {
  if (rounds < 1) return absl::InvalidArgumentError("rounds must be >= 1");
  if (!(participation_ratio > 0.0 && participation_ratio <= 1.0)) {
    return absl::InvalidArgumentError("participation_ratio must be in (0, 1]");
  }
  if (algorithm == FedAlgorithm::kFedAvg && local_epochs < 1) {
    return absl::InvalidArgumentError("local_epochs must be >= 1 for FedAvg");
  }
  if (!(lr > 0.0)) return absl::InvalidArgumentError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    return absl::InvalidArgumentError("momentum must be in [0, 1)");
  }
  if (batch_size < 1) return absl::InvalidArgumentError("batch_size must be >= 1");
  if (model == ArchKind::kMlp && hidden_units < 1) {
    return absl::InvalidArgumentError("hidden_units must be >= 1 for the mlp model");
  }
  return absl::OkStatus();
}

nlohmann::json FedConfig::ToJson() const {
  return {{"rounds", rounds},
          {"participation_ratio", participation_ratio},
          {"local_epochs", local_epochs},
          {"lr", lr},
          {"momentum", momentum},
          {"batch_size", batch_size},
          {"algorithm", AlgorithmName(algorithm)},
          {"seed", seed},
          {"model", ModelName(model)},
          {"hidden_units", hidden_units},
          {"weights_over_all_clients", weights_over_all_clients}};
}

absl::StatusOr<FedConfig> FedConfig::FromJson(const nlohmann::json& doc) {
  FedConfig cfg;
  if (!doc.is_object()) return absl::InvalidArgumentError("expected an object");
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "rounds") {
        cfg.rounds = value.get<int>();
      } else if (key == "participation_ratio") {
        cfg.participation_ratio = value.get<double>();
      } else if (key == "local_epochs") {
        cfg.local_epochs = value.get<int>();
      } else if (key == "lr") {
        cfg.lr = value.get<double>();
      } else if (key == "momentum") {
        cfg.momentum = value.get<double>();
      } else if (key == "batch_size") {
        cfg.batch_size = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<uint64_t>();
      } else if (key == "hidden_units") {
        cfg.hidden_units = value.get<int>();
      } else if (key == "weights_over_all_clients") {
        cfg.weights_over_all_clients = value.get<bool>();
      } else if (key == "algorithm") {
        const auto name = value.get<std::string>();
        if (name == "fedavg") {
          cfg.algorithm = FedAlgorithm::kFedAvg;
        } else if (name == "fedsgd") {
          cfg.algorithm = FedAlgorithm::kFedSgd;
        } else {
          return absl::InvalidArgumentError(
              absl::StrFormat("%s: expected \"fedavg\" or \"fedsgd\"", key));
        }
      } else if (key == "model") {
        const auto name = value.get<std::string>();
        if (name == "linear") {
          cfg.model = ArchKind::kLinear;
        } else if (name == "mlp") {
          cfg.model = ArchKind::kMlp;
        } else {
          return absl::InvalidArgumentError(
              absl::StrFormat("%s: expected \"linear\" or \"mlp\"", key));
        }
      } else {
        return absl::InvalidArgumentError(absl::StrFormat("%s: unknown field", key));
      }
    } catch (const nlohmann::json::exception&) {
      return absl::InvalidArgumentError(absl::StrFormat("%s: wrong type", key));
    }
  }
  return cfg;
}

Architecture ArchitectureFor(const FedConfig& cfg, const FederationData& data) {
  const auto d_in = static_cast<uint32_t>(data.d_in);
  const auto d_out = static_cast<uint32_t>(data.d_out);
  if (cfg.model == ArchKind::kMlp) {
    return Architecture::Mlp(d_in, static_cast<uint32_t>(cfg.hidden_units), d_out);
  }
  return Architecture::Linear(d_in, d_out);
}

std::vector<int> SelectClients(const FedConfig& cfg, int n_clients, int round_index) {
  // The small slack keeps e.g. 0.3 * 10 from rounding up to 4.
  int k = static_cast<int>(std::ceil(cfg.participation_ratio * n_clients - 1e-9));
  k = std::clamp(k, 1, n_clients);
  std::vector<int> ids(n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  if (k < n_clients) {
    CounterRng rng = CounterRng(cfg.seed)
                         .Split(RngStream::kClientSelection)
                         .Split(static_cast<uint64_t>(round_index));
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.UniformInt(n_clients - i));
      std::swap(ids[i], ids[j]);
    }
    ids.resize(k);
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

absl::StatusOr<ModelParams> FedRound(const ModelParams& global,
                                     const FederationData& data,
                                     const FedConfig& cfg, int round_index) {
  FEDRASH_RETURN_IF_ERROR(cfg.Validate());
  if (data.shards.empty()) return absl::InvalidArgumentError("no clients");
  if (global.arch().d_in != static_cast<uint32_t>(data.d_in) ||
      global.arch().d_out != static_cast<uint32_t>(data.d_out)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s does not match data dims (%d, %d)", global.arch().DebugString(),
        data.d_in, data.d_out));
  }
  const std::vector<int> selected =
      SelectClients(cfg, static_cast<int>(data.num_clients()), round_index);

  double denominator = 0.0;
  if (cfg.weights_over_all_clients) {
    for (const ClientShard& s : data.shards) denominator += s.train.size();
  } else {
    for (int c : selected) denominator += data.shards[c].train.size();
  }
  std::vector<double> weight;
  for (int c : selected) weight.push_back(data.shards[c].train.size() / denominator);

  const size_t p = global.weights().size();
  std::vector<double> out(p, 0.0);
  if (cfg.algorithm == FedAlgorithm::kFedSgd) {
    std::vector<double> step(p, 0.0);
    for (size_t i = 0; i < selected.size(); ++i) {
      FEDRASH_ASSIGN_OR_RETURN(LossAndGradient lg,
                               LossAndGrad(global, data.shards[selected[i]].train));
      for (size_t j = 0; j < p; ++j) step[j] += weight[i] * lg.grad[j];
    }
    for (size_t j = 0; j < p; ++j) out[j] = global.weights()[j] - cfg.lr * step[j];
    return ModelParams::Create(global.arch(), std::move(out));
  }

  const SgdOptions sgd{cfg.lr, cfg.local_epochs, cfg.batch_size, cfg.momentum};
  std::vector<ModelParams> locals;
  locals.reserve(selected.size());
  for (int c : selected) {
    const uint64_t client_seed = DeriveSeed(
        {cfg.seed, static_cast<uint64_t>(round_index), static_cast<uint64_t>(c)});
    FEDRASH_ASSIGN_OR_RETURN(
        ModelParams local, SgdEpochs(global, data.shards[c].train, sgd, client_seed));
    locals.push_back(std::move(local));
  }
  if (cfg.weights_over_all_clients) {
    for (size_t i = 0; i < locals.size(); ++i) {
      for (size_t j = 0; j < p; ++j) out[j] += weight[i] * locals[i].weights()[j];
    }
  } else {
    // Anchored at the first client: h_0 + sum_c w_c (h_c - h_0), which equals
    // sum_c w_c h_c because the weights sum to one, and returns h_0 exactly
    // when every client model is identical.
    std::span<const double> anchor = locals[0].weights();
    std::copy(anchor.begin(), anchor.end(), out.begin());
    for (size_t i = 1; i < locals.size(); ++i) {
      for (size_t j = 0; j < p; ++j) {
        out[j] += weight[i] * (locals[i].weights()[j] - anchor[j]);
      }
    }
  }
  return ModelParams::Create(global.arch(), std::move(out));
}

absl::StatusOr<CandidateRecord> TrainCandidate(const FederationData& data,
                                               const FedConfig& cfg) {
  FEDRASH_RETURN_IF_ERROR(cfg.Validate());
  const Architecture arch = ArchitectureFor(cfg, data);
  ModelParams model =
      ModelParams::RandomInit(arch, CounterRng(cfg.seed).Split(RngStream::kModelInit));
  for (int r = 0; r < cfg.rounds; ++r) {
    FEDRASH_ASSIGN_OR_RETURN(model, FedRound(model, data, cfg, r));
  }
  return CandidateRecord{std::move(model), cfg, 0};
}

std::vector<FedConfig> PoolGrid::Expand() const {
  std::vector<FedConfig> out;
  for (uint64_t seed : seeds) {
    for (double ratio : participation_ratios) {
      for (int epochs : local_epochs) {
        FedConfig cfg = base;
        cfg.seed = seed;
        cfg.participation_ratio = ratio;
        cfg.local_epochs = epochs;
        out.push_back(cfg);
      }
    }
  }
  return out;
}

nlohmann::json PoolGrid::ToJson() const {
  return {{"seeds", seeds},
          {"participation_ratios", participation_ratios},
          {"local_epochs", local_epochs},
          {"base", base.ToJson()}};
}

absl::StatusOr<PoolGrid> PoolGrid::FromJson(const nlohmann::json& doc) {
  PoolGrid grid;
  try {
    grid.seeds = doc.at("seeds").get<std::vector<uint64_t>>();
    grid.participation_ratios = doc.at("participation_ratios").get<std::vector<double>>();
    grid.local_epochs = doc.at("local_epochs").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrFormat("pool grid: %s", e.what()));
  }
  if (doc.contains("base")) {
    FEDRASH_ASSIGN_OR_RETURN(grid.base, FedConfig::FromJson(doc["base"]));
  }
  return grid;
}

absl::StatusOr<CandidatePool> GeneratePool(const FederationData& data,
                                           const PoolGrid& grid,
                                           const std::filesystem::path& store,
                                           const GenerateOptions& options) {
  if (grid.size() == 0) return absl::InvalidArgumentError("empty pool grid");
  const std::vector<FedConfig> configs = grid.Expand();
  for (const FedConfig& cfg : configs) FEDRASH_RETURN_IF_ERROR(cfg.Validate());

  FEDRASH_RETURN_IF_ERROR(EnsureDirectory(store));
  const std::string digest = data.Digest();
  nlohmann::json manifest = {
      {"grid", grid.ToJson()}, {"data_digest", digest}, {"size", configs.size()}};
  const std::filesystem::path manifest_path = store / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(manifest_path));
    nlohmann::json existing = nlohmann::json::parse(text, nullptr, false);
    if (existing != manifest) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "pool store %s was created for a different grid or dataset",
          store.string()));
    }
  } else {
    FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(manifest_path, manifest.dump(2) + "\n"));
  }

  std::vector<std::optional<CandidateRecord>> records(configs.size());
  std::vector<size_t> missing;
  for (size_t i = 0; i < configs.size(); ++i) {
    const std::filesystem::path bin = store / (CandidateStem(i) + ".bin");
    const std::filesystem::path meta = store / (CandidateStem(i) + ".json");
    if (std::filesystem::exists(bin) && std::filesystem::exists(meta)) {
      auto bytes = ReadFile(bin);
      auto meta_text = ReadFile(meta);
      if (bytes.ok() && meta_text.ok()) {
        auto params = ParseModel(*bytes);
        nlohmann::json m = nlohmann::json::parse(*meta_text, nullptr, false);
        if (params.ok() && !m.is_discarded() && m.value("pool_index", -1) == static_cast<int>(i) &&
            m.contains("config") && m["config"] == configs[i].ToJson() &&
            params->arch() == ArchitectureFor(configs[i], data)) {
          records[i] = CandidateRecord{*std::move(params), configs[i], static_cast<int>(i)};
          continue;
        }
      }
    }
    missing.push_back(i);
  }

  if (options.max_new_candidates && *options.max_new_candidates < missing.size()) {
    missing.resize(*options.max_new_candidates);
  }
  const bool interrupted = options.max_new_candidates &&
                           std::count(records.begin(), records.end(), std::nullopt) >
                               static_cast<std::ptrdiff_t>(missing.size());

  std::mutex writer;
  FEDRASH_RETURN_IF_ERROR(ParallelFor(missing.size(), options.workers, [&](size_t k) {
    const size_t i = missing[k];
    FEDRASH_ASSIGN_OR_RETURN(CandidateRecord rec, TrainCandidate(data, configs[i]));
    rec.pool_index = static_cast<int>(i);
    nlohmann::json meta = {{"pool_index", i}, {"config", configs[i].ToJson()}};
    std::lock_guard<std::mutex> lock(writer);
    FEDRASH_RETURN_IF_ERROR(
        WriteFileAtomic(store / (CandidateStem(i) + ".bin"), SerializeModel(rec.params)));
    FEDRASH_RETURN_IF_ERROR(
        WriteFileAtomic(store / (CandidateStem(i) + ".json"), meta.dump(2) + "\n"));
    records[i] = std::move(rec);
    return absl::OkStatus();
  }));
  if (interrupted) {
    return absl::AbortedError(absl::StrFormat(
        "pool generation stopped after %d new candidates", missing.size()));
  }

  CandidatePool pool;
  pool.data_manifest_hash = digest;
  for (auto& r : records) pool.records.push_back(*std::move(r));
  return pool;
}

absl::StatusOr<CandidatePool> LoadPool(const std::filesystem::path& store) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(store / "manifest.json"));
  nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
  if (manifest.is_discarded()) {
    return absl::DataLossError(absl::StrFormat("%s: corrupt pool manifest", store.string()));
  }
  CandidatePool pool;
  try {
    FEDRASH_ASSIGN_OR_RETURN(PoolGrid grid, PoolGrid::FromJson(manifest.at("grid")));
    pool.data_manifest_hash = manifest.at("data_digest").get<std::string>();
    const std::vector<FedConfig> configs = grid.Expand();
    for (size_t i = 0; i < configs.size(); ++i) {
      auto bytes = ReadFile(store / (CandidateStem(i) + ".bin"));
      if (!bytes.ok()) {
        return absl::NotFoundError(absl::StrFormat(
            "%s: candidate %d missing; rerun train-pool to resume", store.string(), i));
      }
      FEDRASH_ASSIGN_OR_RETURN(ModelParams params, ParseModel(*bytes));
      if (i > 0 && !(params.arch() == pool.records[0].params.arch())) {
        return absl::DataLossError("pool candidates disagree on architecture");
      }
      pool.records.push_back(CandidateRecord{std::move(params), configs[i], static_cast<int>(i)});
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(
        absl::StrFormat("%s: malformed pool manifest: %s", store.string(), e.what()));
  }
  return pool;
}

}  // namespace fedrash
