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

#include <algorithm>

#include "absl/strings/str_format.h"
#include "fedrash/csv.h"
#include "fedrash/file_util.h"
#include "fedrash/rng.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

struct GroupCounts {
  size_t n[2] = {0, 0};
  size_t positive[2] = {0, 0};

  ParityGap Gap() const {
    if (n[0] == 0 || n[1] == 0) return {0.0, GapStatus::kUndefined};
    const double r1 = static_cast<double>(positive[1]) / static_cast<double>(n[1]);
    const double r0 = static_cast<double>(positive[0]) / static_cast<double>(n[0]);
    return {std::abs(r1 - r0), GapStatus::kOk};
  }
};

absl::Status Accumulate(std::span<const int> decisions, std::span<const int> sensitive,
                        GroupCounts& counts) {
  if (decisions.size() != sensitive.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d decisions but %d sensitive bits", decisions.size(), sensitive.size()));
  }
  for (size_t i = 0; i < decisions.size(); ++i) {
    const int y = decisions[i];
    const int z = sensitive[i];
    if ((y != 0 && y != 1) || (z != 0 && z != 1)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("row %d: decision %d and sensitive bit %d must be 0/1", i, y, z));
    }
    ++counts.n[z];
    counts.positive[z] += static_cast<size_t>(y);
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<ParityGap> DemographicParityGap(std::span<const int> decisions,
                                               std::span<const int> sensitive) {
  GroupCounts counts;
  FEDRASH_RETURN_IF_ERROR(Accumulate(decisions, sensitive, counts));
  return counts.Gap();
}

std::string FairnessReport::ToCsv() const {
  std::string out = FormatCsvRow({"client", "candidate", "accuracy", "dp_gap", "status"});
  for (const FairnessRow& r : rows) {
    const bool ok = r.dp_gap.status == GapStatus::kOk;
    out += FormatCsvRow({r.client, std::to_string(r.candidate), FormatDouble(r.accuracy),
                         ok ? FormatDouble(r.dp_gap.gap) : "", ok ? "ok" : "undefined"});
  }
  return out;
}

absl::StatusOr<FairnessReport> FairnessSweep(const PredictionTensor& tensor,
                                             const RashomonSelection& selection,
                                             size_t sample_k, uint64_t seed) {
  if (!tensor.is_binary()) {
    return absl::InvalidArgumentError("demographic parity needs a binary task");
  }
  if (selection.members.size() != tensor.num_candidates()) {
    return absl::InvalidArgumentError("selection does not match the tensor's pool");
  }
  std::vector<size_t> fair_clients;
  for (size_t c = 0; c < tensor.num_clients(); ++c) {
    if (tensor.client(c).sensitive.has_value()) fair_clients.push_back(c);
  }
  if (fair_clients.empty()) {
    return absl::FailedPreconditionError("no evaluation client has a sensitive attribute");
  }
  std::vector<size_t> members = selection.MemberIndices();
  if (members.empty()) {
    return absl::FailedPreconditionError("cannot sample from an empty Rashomon set");
  }

  FairnessReport report;
  const size_t k = std::min(sample_k, members.size());
  CounterRng rng = CounterRng(seed).Split(RngStream::kFairnessSample);
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.UniformInt(members.size() - i));
    std::swap(members[i], members[j]);
  }
  report.sampled.assign(members.begin(), members.begin() + static_cast<ptrdiff_t>(k));
  std::sort(report.sampled.begin(), report.sampled.end());

  std::vector<FairnessRow> global;
  for (size_t candidate : report.sampled) {
    GroupCounts pooled;
    size_t correct = 0;
    size_t total = 0;
    for (size_t c : fair_clients) {
      const ClientPredictions& client = tensor.client(c);
      std::span<const int> dec = tensor.Decisions(c, candidate);
      GroupCounts local;
      FEDRASH_RETURN_IF_ERROR(Accumulate(dec, *client.sensitive, local));
      FEDRASH_RETURN_IF_ERROR(Accumulate(dec, *client.sensitive, pooled));
      report.rows.push_back({std::to_string(client.client_id), candidate,
                             tensor.Accuracy(c, candidate), local.Gap()});
      correct += tensor.Correct(c, candidate);
      total += tensor.n_test(c);
    }
    global.push_back({"global", candidate,
                      static_cast<double>(correct) / static_cast<double>(total),
                      pooled.Gap()});
  }
  report.rows.insert(report.rows.end(), global.begin(), global.end());
  return report;
}

std::optional<size_t> SmallestSufficientEpsilon(
    std::span<const RashomonSelection> selections, size_t sample_k) {
  for (size_t i = 0; i < selections.size(); ++i) {
    if (selections[i].size() >= sample_k) return i;
  }
  return std::nullopt;
}

}  // namespace fedrash
