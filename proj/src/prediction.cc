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

#include "fedrash/prediction.h"

#include <bit>
#include <cmath>
#include <set>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedrash/file_util.h"
#include "fedrash/parallel.h"
#include "fedrash/status_macros.h"

namespace fedrash {

int ArgmaxLowest(std::span<const double> scores) {
  int best = 0;
  for (size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  }
  return best;
}

absl::StatusOr<PredictionTensor> PredictionTensor::Create(
    int d_out, size_t num_candidates, std::vector<ClientPredictions> clients) {
  if (d_out < 2) return absl::InvalidArgumentError("d_out must be >= 2");
  if (num_candidates == 0) return absl::InvalidArgumentError("no candidates");
  PredictionTensor t;
  t.d_out_ = d_out;
  t.num_candidates_ = num_candidates;
  std::set<int> seen;
  for (const ClientPredictions& c : clients) {
    if (!seen.insert(c.client_id).second) {
      return absl::InvalidArgumentError(
          absl::StrFormat("duplicate client id %d", c.client_id));
    }
    const size_t n = c.labels.size();
    if (n == 0) {
      return absl::InvalidArgumentError(
          absl::StrFormat("client %d has no test samples", c.client_id));
    }
    if (c.scores.size() != num_candidates * n * d_out) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "client %d: expected %d scores, got %d", c.client_id,
          num_candidates * n * d_out, c.scores.size()));
    }
    if (c.sensitive && c.sensitive->size() != n) {
      return absl::InvalidArgumentError(
          absl::StrFormat("client %d: sensitive bits misaligned", c.client_id));
    }
    for (int y : c.labels) {
      if (y < 0 || y >= d_out) {
        return absl::InvalidArgumentError(
            absl::StrFormat("client %d: label %d out of range", c.client_id, y));
      }
    }
    for (size_t row = 0; row < num_candidates * n; ++row) {
      double sum = 0.0;
      for (int k = 0; k < d_out; ++k) {
        const double p = c.scores[row * d_out + k];
        if (!(p >= 0.0 && p <= 1.0)) {
          return absl::InvalidArgumentError(absl::StrFormat(
              "client %d: score %g outside [0, 1]", c.client_id, p));
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        return absl::InvalidArgumentError(absl::StrFormat(
            "client %d: score row sums to %g", c.client_id, sum));
      }
    }
  }
  t.clients_ = std::move(clients);
  for (const ClientPredictions& c : t.clients_) {
    const size_t n = c.labels.size();
    std::vector<int> decisions(num_candidates * n);
    std::vector<size_t> correct(num_candidates, 0);
    for (size_t j = 0; j < num_candidates; ++j) {
      for (size_t i = 0; i < n; ++i) {
        const size_t row = j * n + i;
        decisions[row] = ArgmaxLowest(
            std::span<const double>(c.scores.data() + row * d_out, d_out));
        if (decisions[row] == c.labels[i]) ++correct[j];
      }
    }
    t.decisions_.push_back(std::move(decisions));
    t.correct_.push_back(std::move(correct));
  }
  return t;
}

std::vector<int> PredictionTensor::client_ids() const {
  std::vector<int> ids;
  for (const auto& c : clients_) ids.push_back(c.client_id);
  return ids;
}

absl::StatusOr<size_t> PredictionTensor::IndexOf(int client_id) const {
  for (size_t i = 0; i < clients_.size(); ++i) {
    if (clients_[i].client_id == client_id) return i;
  }
  return absl::NotFoundError(absl::StrFormat("client %d not in tensor", client_id));
}

absl::StatusOr<PredictionTensor> EvaluatePool(const CandidatePool& pool,
                                              const FederationData& data,
                                              std::span<const int> eval_clients,
                                              int workers) {
  if (pool.records.empty()) return absl::InvalidArgumentError("empty pool");
  const Architecture& arch = pool.records[0].params.arch();
  if (arch.d_in != static_cast<uint32_t>(data.d_in) ||
      arch.d_out != static_cast<uint32_t>(data.d_out)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "pool architecture %s does not match data dims (%d, %d)",
        arch.DebugString(), data.d_in, data.d_out));
  }
  std::vector<ClientPredictions> clients(eval_clients.size());
  for (size_t e = 0; e < eval_clients.size(); ++e) {
    const int id = eval_clients[e];
    if (id < 0 || static_cast<size_t>(id) >= data.num_clients()) {
      return absl::InvalidArgumentError(absl::StrFormat("unknown client %d", id));
    }
    const ClientShard& shard = data.shards[id];
    clients[e].client_id = id;
    clients[e].labels = shard.test.labels;
    clients[e].sensitive = shard.sensitive;
    clients[e].scores.resize(pool.size() * shard.test.size() * data.d_out);
  }
  const size_t n_candidates = pool.size();
  FEDRASH_RETURN_IF_ERROR(
      ParallelFor(eval_clients.size() * n_candidates, workers, [&](size_t job) {
        const size_t e = job / n_candidates;
        const size_t j = job % n_candidates;
        const ClientShard& shard = data.shards[eval_clients[e]];
        FEDRASH_ASSIGN_OR_RETURN(Matrix probs,
                                 Forward(pool.records[j].params, shard.test.features));
        std::copy(probs.data().begin(), probs.data().end(),
                  clients[e].scores.begin() + j * probs.data().size());
        return absl::OkStatus();
      }));
  return PredictionTensor::Create(data.d_out, n_candidates, std::move(clients));
}

absl::Status SavePredictionCache(const PredictionTensor& tensor,
                                 const std::filesystem::path& dir) {
  FEDRASH_RETURN_IF_ERROR(EnsureDirectory(dir));
  nlohmann::json index = {{"d_out", tensor.d_out()},
                          {"num_candidates", tensor.num_candidates()}};
  nlohmann::json clients = nlohmann::json::array();
  for (size_t c = 0; c < tensor.num_clients(); ++c) {
    const ClientPredictions& cp = tensor.client(c);
    std::string blob;
    blob.reserve(cp.scores.size() * 8);
    for (double v : cp.scores) {
      const uint64_t bits = std::bit_cast<uint64_t>(v);
      for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
    const std::string file = absl::StrFormat("client_%d.bin", cp.client_id);
    FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / file, blob));
    nlohmann::json entry = {{"client_id", cp.client_id},
                            {"file", file},
                            {"n_test", cp.labels.size()},
                            {"labels", cp.labels}};
    if (cp.sensitive) entry["sensitive"] = *cp.sensitive;
    clients.push_back(std::move(entry));
  }
  index["clients"] = std::move(clients);
  return WriteFileAtomic(dir / "index.json", index.dump() + "\n");
}

absl::StatusOr<PredictionTensor> LoadPredictionCache(const std::filesystem::path& dir) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(dir / "index.json"));
  nlohmann::json index = nlohmann::json::parse(text, nullptr, false);
  if (index.is_discarded()) {
    return absl::DataLossError(absl::StrFormat("%s: corrupt index", dir.string()));
  }
  try {
    const int d_out = index.at("d_out").get<int>();
    const size_t n_candidates = index.at("num_candidates").get<size_t>();
    std::vector<ClientPredictions> clients;
    for (const auto& entry : index.at("clients")) {
      ClientPredictions cp;
      cp.client_id = entry.at("client_id").get<int>();
      cp.labels = entry.at("labels").get<std::vector<int>>();
      if (entry.contains("sensitive")) {
        cp.sensitive = entry["sensitive"].get<std::vector<int>>();
      }
      FEDRASH_ASSIGN_OR_RETURN(std::string blob,
                               ReadFile(dir / entry.at("file").get<std::string>()));
      if (blob.size() % 8 != 0) {
        return absl::DataLossError("prediction cache file size not a multiple of 8");
      }
      cp.scores.resize(blob.size() / 8);
      for (size_t j = 0; j < cp.scores.size(); ++j) {
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
          bits |= static_cast<uint64_t>(static_cast<uint8_t>(blob[8 * j + i])) << (8 * i);
        }
        cp.scores[j] = std::bit_cast<double>(bits);
      }
      clients.push_back(std::move(cp));
    }
    return PredictionTensor::Create(d_out, n_candidates, std::move(clients));
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(absl::StrFormat("%s: malformed index: %s", dir.string(), e.what()));
  }
}

}  // namespace fedrash
