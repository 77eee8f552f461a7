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

#ifndef FEDRASH_FEDERATION_H_
#define FEDRASH_FEDERATION_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/data.h"
#include "fedrash/model.h"
#include "json.hpp"

namespace fedrash {

enum class FedAlgorithm { kFedAvg, kFedSgd };

struct FedConfig {
  int rounds = 20;
  double participation_ratio = 1.0;
  int local_epochs = 1;  // Ignored under FedSGD.
  double lr = 0.1;
  double momentum = 0.0;
  int batch_size = 32;
  FedAlgorithm algorithm = FedAlgorithm::kFedAvg;
  uint64_t seed = 0;
  ArchKind model = ArchKind::kLinear;
  int hidden_units = 0;  // kMlp only.
  // Aggregation weights n_c / n over all clients instead of n_c / n_selected.
  bool weights_over_all_clients = false;

  absl::Status Validate() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<FedConfig> FromJson(const nlohmann::json& doc);
  bool operator==(const FedConfig&) const = default;
};

Architecture ArchitectureFor(const FedConfig& cfg, const FederationData& data);

// The ceil(ratio * C) clients taking part in `round_index`, ascending.
std::vector<int> SelectClients(const FedConfig& cfg, int n_clients, int round_index);

// One server round. FedAvg: each selected client runs local_epochs of SGD
// from `global` and the server returns the train-size weighted average of the
// client models. FedSGD: each selected client computes its full-train-set
// gradient and the server takes one step along their weighted average.
absl::StatusOr<ModelParams> FedRound(const ModelParams& global,
                                     const FederationData& data,
                                     const FedConfig& cfg, int round_index);

struct CandidateRecord {
  ModelParams params;
  FedConfig config;
  int pool_index = 0;
};

// Runs cfg.rounds rounds from a fresh initialization drawn from cfg.seed.
absl::StatusOr<CandidateRecord> TrainCandidate(const FederationData& data,
                                               const FedConfig& cfg);

struct PoolGrid {
  std::vector<uint64_t> seeds;
  std::vector<double> participation_ratios;
  std::vector<int> local_epochs;
  FedConfig base;

  size_t size() const {
    return seeds.size() * participation_ratios.size() * local_epochs.size();
  }
  // Cartesian product ordered lexicographically by (seed, ratio, epochs).
  std::vector<FedConfig> Expand() const;
  nlohmann::json ToJson() const;
  static absl::StatusOr<PoolGrid> FromJson(const nlohmann::json& doc);
};

struct CandidatePool {
  std::vector<CandidateRecord> records;
  std::string data_manifest_hash;

  size_t size() const { return records.size(); }
};

struct GenerateOptions {
  int workers = 1;
  // Stop with kAborted after this many candidates have been trained in this
  // call; used to exercise resumption.
  std::optional<size_t> max_new_candidates;
};

// Trains every grid cell and persists each candidate as soon as it finishes:
//   <store>/manifest.json           grid and data digest
//   <store>/candidate_<i>.bin       model binary record
//   <store>/candidate_<i>.json      training configuration
// Candidates already present and consistent with the grid are reused, so an
// interrupted generation resumes where it stopped. A store created for a
// different grid or dataset is rejected.
absl::StatusOr<CandidatePool> GeneratePool(const FederationData& data,
                                           const PoolGrid& grid,
                                           const std::filesystem::path& store,
                                           const GenerateOptions& options = {});

absl::StatusOr<CandidatePool> LoadPool(const std::filesystem::path& store);

}  // namespace fedrash

#endif  // FEDRASH_FEDERATION_H_
