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

#ifndef FEDRASH_PREDICTION_H_
#define FEDRASH_PREDICTION_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/data.h"
#include "fedrash/federation.h"

namespace fedrash {

// Index of the largest entry; ties go to the lowest index.
int ArgmaxLowest(std::span<const double> scores);

// Evaluation results of every candidate on one client's test split.
struct ClientPredictions {
  int client_id = 0;
  std::vector<int> labels;
  std::optional<std::vector<int>> sensitive;
  // Row-major (candidate, sample, class).
  std::vector<double> scores;
};

// Scores, decisions and accuracies of every candidate on every evaluation
// client. Immutable once built.
class PredictionTensor {
 public:
  // Validates the score blocks (probability rows, consistent shapes) and
  // derives decisions and per-candidate correct counts.
  static absl::StatusOr<PredictionTensor> Create(
      int d_out, size_t num_candidates, std::vector<ClientPredictions> clients);

  int d_out() const { return d_out_; }
  bool is_binary() const { return d_out_ == 2; }
  size_t num_candidates() const { return num_candidates_; }
  size_t num_clients() const { return clients_.size(); }
  const ClientPredictions& client(size_t idx) const { return clients_[idx]; }
  std::vector<int> client_ids() const;
  // Position of `client_id` in the tensor.
  absl::StatusOr<size_t> IndexOf(int client_id) const;

  size_t n_test(size_t client_idx) const { return clients_[client_idx].labels.size(); }
  std::span<const double> ScoreRow(size_t client_idx, size_t candidate,
                                   size_t sample) const {
    const size_t n = n_test(client_idx);
    return {clients_[client_idx].scores.data() +
                (candidate * n + sample) * static_cast<size_t>(d_out_),
            static_cast<size_t>(d_out_)};
  }
  int Decision(size_t client_idx, size_t candidate, size_t sample) const {
    return decisions_[client_idx][candidate * n_test(client_idx) + sample];
  }
  std::span<const int> Decisions(size_t client_idx, size_t candidate) const {
    const size_t n = n_test(client_idx);
    return {decisions_[client_idx].data() + candidate * n, n};
  }
  size_t Correct(size_t client_idx, size_t candidate) const {
    return correct_[client_idx][candidate];
  }
  double Accuracy(size_t client_idx, size_t candidate) const {
    return static_cast<double>(Correct(client_idx, candidate)) /
           static_cast<double>(n_test(client_idx));
  }

 private:
  PredictionTensor() = default;

  int d_out_ = 0;
  size_t num_candidates_ = 0;
  std::vector<ClientPredictions> clients_;
  std::vector<std::vector<int>> decisions_;
  std::vector<std::vector<size_t>> correct_;
};

// Runs every candidate on the test split of each client in `eval_clients`.
absl::StatusOr<PredictionTensor> EvaluatePool(const CandidatePool& pool,
                                              const FederationData& data,
                                              std::span<const int> eval_clients,
                                              int workers = 1);

// One client_<id>.bin per client holding little-endian doubles in
// (candidate, sample, class) order, plus index.json with shapes, labels and
// sensitive bits.
absl::Status SavePredictionCache(const PredictionTensor& tensor,
                                 const std::filesystem::path& dir);
absl::StatusOr<PredictionTensor> LoadPredictionCache(const std::filesystem::path& dir);

}  // namespace fedrash

#endif  // FEDRASH_PREDICTION_H_
