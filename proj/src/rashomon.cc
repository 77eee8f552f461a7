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

#include "fedrash/rashomon.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

absl::Status ValidateConstraints(const std::vector<PerformanceConstraint>& constraints) {
  if (constraints.empty()) return absl::InvalidArgumentError("no performance constraints");
  for (const auto& c : constraints) {
    if (!std::isfinite(c.epsilon) || c.epsilon < 0.0) {
      return absl::InvalidArgumentError(
          absl::StrFormat("epsilon must be finite and >= 0, got %g", c.epsilon));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<size_t>> ResolveClients(const PredictionTensor& tensor,
                                                   std::span<const int> eval_clients) {
  if (eval_clients.empty()) return absl::InvalidArgumentError("no evaluation clients");
  std::vector<size_t> out;
  for (int id : eval_clients) {
    FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(id));
    out.push_back(idx);
  }
  return out;
}

bool PassesOnClient(const PredictionTensor& tensor, size_t client_idx,
                    const std::vector<PerformanceConstraint>& constraints,
                    size_t baseline, size_t candidate) {
  for (const auto& c : constraints) {
    if (PerformanceGap(tensor, client_idx, c.metric, baseline, candidate) > c.epsilon) {
      return false;
    }
  }
  return true;
}

RashomonSelection NewSelection(const PredictionTensor& tensor,
                               RashomonDefinition definition,
                               const std::vector<PerformanceConstraint>& constraints,
                               size_t baseline, const std::vector<size_t>& clients) {
  RashomonSelection s;
  s.definition = definition;
  s.constraints = constraints;
  s.baseline_index = baseline;
  s.members.assign(tensor.num_candidates(), false);
  for (size_t idx : clients) s.client_ids.push_back(tensor.client(idx).client_id);
  s.pass.assign(tensor.num_candidates(), std::vector<bool>(clients.size(), false));
  for (size_t j = 0; j < tensor.num_candidates(); ++j) {
    for (size_t k = 0; k < clients.size(); ++k) {
      s.pass[j][k] = PassesOnClient(tensor, clients[k], constraints, baseline, j);
    }
  }
  return s;
}

std::string MetricName(PerformanceMetric) { return "accuracy"; }

}  // namespace

std::string RashomonDefinition::Label() const {
  switch (kind) {
    case DefinitionKind::kGlobal:
      return "global";
    case DefinitionKind::kTAgreement:
      return absl::StrFormat("t_agreement(%g)", t);
    case DefinitionKind::kIndividual:
      return absl::StrFormat("individual(%d)", client_id);
  }
  return "unknown";
}

size_t RashomonSelection::size() const {
  return static_cast<size_t>(std::count(members.begin(), members.end(), true));
}

std::vector<size_t> RashomonSelection::MemberIndices() const {
  std::vector<size_t> out;
  for (size_t j = 0; j < members.size(); ++j) {
    if (members[j]) out.push_back(j);
  }
  return out;
}

nlohmann::json RashomonSelection::ToJson(bool include_pass_matrix) const {
  nlohmann::json doc;
  switch (definition.kind) {
    case DefinitionKind::kGlobal:
      doc["definition"] = "global";
      break;
    case DefinitionKind::kTAgreement:
      doc["definition"] = "t_agreement";
      doc["t"] = definition.t;
      break;
    case DefinitionKind::kIndividual:
      doc["definition"] = "individual";
      doc["client_id"] = definition.client_id;
      break;
  }
  nlohmann::json cons = nlohmann::json::array();
  for (const auto& c : constraints) {
    cons.push_back({{"metric", MetricName(c.metric)}, {"epsilon", c.epsilon}});
  }
  doc["constraints"] = std::move(cons);
  doc["baseline_index"] = baseline_index;
  doc["pool_size"] = members.size();
  doc["members"] = MemberIndices();
  doc["empty"] = empty();
  doc["clients"] = client_ids;
  if (include_pass_matrix) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : pass) {
      std::string bits;
      for (bool b : row) bits.push_back(b ? '1' : '0');
      rows.push_back(bits);
    }
    doc["pass_matrix"] = std::move(rows);
  }
  return doc;
}

absl::StatusOr<RashomonSelection> RashomonSelection::FromJson(const nlohmann::json& doc) {
  RashomonSelection sel;
  try {
    const std::string kind = doc.at("definition").get<std::string>();
    if (kind == "global") {
      sel.definition.kind = DefinitionKind::kGlobal;
    } else if (kind == "t_agreement") {
      sel.definition.kind = DefinitionKind::kTAgreement;
      sel.definition.t = doc.at("t").get<double>();
    } else if (kind == "individual") {
      sel.definition.kind = DefinitionKind::kIndividual;
      sel.definition.client_id = doc.at("client_id").get<int>();
    } else {
      return absl::InvalidArgumentError(absl::StrFormat("unknown definition '%s'", kind));
    }
    for (const auto& c : doc.at("constraints")) {
      if (c.at("metric").get<std::string>() != "accuracy") {
        return absl::InvalidArgumentError("unknown performance metric");
      }
      sel.constraints.push_back({PerformanceMetric::kAccuracy, c.at("epsilon").get<double>()});
    }
    sel.baseline_index = doc.at("baseline_index").get<size_t>();
    sel.members.assign(doc.at("pool_size").get<size_t>(), false);
    for (size_t j : doc.at("members").get<std::vector<size_t>>()) {
      if (j >= sel.members.size()) return absl::InvalidArgumentError("member index out of range");
      sel.members[j] = true;
    }
    sel.client_ids = doc.at("clients").get<std::vector<int>>();
    if (doc.contains("pass_matrix")) {
      for (const auto& row : doc.at("pass_matrix")) {
        std::vector<bool> bits;
        for (char b : row.get<std::string>()) bits.push_back(b == '1');
        sel.pass.push_back(std::move(bits));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrFormat("bad selection: %s", e.what()));
  }
  if (sel.baseline_index >= sel.members.size()) {
    return absl::InvalidArgumentError("baseline index out of range");
  }
  return sel;
}

double PerformanceGap(const PredictionTensor& tensor, size_t client_idx,
                      PerformanceMetric metric, size_t a, size_t b) {
  switch (metric) {
    case PerformanceMetric::kAccuracy:
      // |acc_a - acc_b| computed from the integer counts, without cancellation.
      return std::abs(static_cast<double>(tensor.Correct(client_idx, a)) -
                      static_cast<double>(tensor.Correct(client_idx, b))) /
             static_cast<double>(tensor.n_test(client_idx));
  }
  return 0.0;
}

absl::StatusOr<size_t> SelectBaseline(const PredictionTensor& tensor,
                                      std::span<const int> eval_clients) {
  FEDRASH_ASSIGN_OR_RETURN(std::vector<size_t> clients, ResolveClients(tensor, eval_clients));
  size_t best = 0;
  size_t best_correct = 0;
  for (size_t j = 0; j < tensor.num_candidates(); ++j) {
    size_t correct = 0;
    for (size_t idx : clients) correct += tensor.Correct(idx, j);
    // The test-set total is shared by every candidate, so comparing correct
    // counts is comparing weighted accuracies, without rounding.
    if (j == 0 || correct > best_correct) {
      best = j;
      best_correct = correct;
    }
  }
  return best;
}

absl::StatusOr<RashomonSelection> BuildGlobal(
    const PredictionTensor& tensor, std::span<const int> eval_clients,
    const std::vector<PerformanceConstraint>& constraints, size_t baseline,
    Aggregation aggregation) {
  FEDRASH_RETURN_IF_ERROR(ValidateConstraints(constraints));
  if (baseline >= tensor.num_candidates()) {
    return absl::InvalidArgumentError("baseline index out of range");
  }
  FEDRASH_ASSIGN_OR_RETURN(std::vector<size_t> clients, ResolveClients(tensor, eval_clients));
  RashomonSelection s = NewSelection(tensor, {DefinitionKind::kGlobal}, constraints,
                                     baseline, clients);
  double total_weight = 0.0;
  for (size_t idx : clients) {
    total_weight += aggregation == Aggregation::kWeightedMean
                        ? static_cast<double>(tensor.n_test(idx))
                        : 1.0;
  }
  for (size_t j = 0; j < tensor.num_candidates(); ++j) {
    bool ok = true;
    for (const auto& c : constraints) {
      double acc = 0.0;
      for (size_t idx : clients) {
        if (aggregation == Aggregation::kWeightedMean) {
          // n_c * |acc_c(b) - acc_c(j)| is the integer count difference;
          // summing counts keeps the aggregate exact.
          acc += std::abs(static_cast<double>(tensor.Correct(idx, baseline)) -
                          static_cast<double>(tensor.Correct(idx, j)));
        } else {
          acc += PerformanceGap(tensor, idx, c.metric, baseline, j);
        }
      }
      if (acc / total_weight > c.epsilon) {
        ok = false;
        break;
      }
    }
    s.members[j] = ok;
  }
  return s;
}

size_t RequiredAgreementCount(double t, size_t n_eval) {
  // 0.6 * 20 and friends land a hair above an integer in binary floating point.
  const double raw = std::ceil(t * static_cast<double>(n_eval) - 1e-9);
  return std::clamp(static_cast<size_t>(std::max(raw, 1.0)), size_t{1}, n_eval);
}

absl::StatusOr<RashomonSelection> BuildTAgreement(
    const PredictionTensor& tensor, std::span<const int> eval_clients,
    const std::vector<PerformanceConstraint>& constraints, size_t baseline, double t) {
  FEDRASH_RETURN_IF_ERROR(ValidateConstraints(constraints));
  if (!(t > 0.0 && t <= 1.0)) {
    return absl::InvalidArgumentError(absl::StrFormat("t must be in (0, 1], got %g", t));
  }
  if (baseline >= tensor.num_candidates()) {
    return absl::InvalidArgumentError("baseline index out of range");
  }
  FEDRASH_ASSIGN_OR_RETURN(std::vector<size_t> clients, ResolveClients(tensor, eval_clients));
  RashomonDefinition def{DefinitionKind::kTAgreement, t};
  RashomonSelection s = NewSelection(tensor, def, constraints, baseline, clients);
  const size_t required = RequiredAgreementCount(t, clients.size());
  for (size_t j = 0; j < tensor.num_candidates(); ++j) {
    const size_t passing =
        static_cast<size_t>(std::count(s.pass[j].begin(), s.pass[j].end(), true));
    s.members[j] = passing >= required;
  }
  return s;
}

absl::StatusOr<RashomonSelection> BuildIndividual(
    const PredictionTensor& tensor, int client_id,
    const std::vector<PerformanceConstraint>& constraints, size_t baseline,
    const ConstraintOverrides& overrides) {
  auto it = overrides.find(client_id);
  const std::vector<PerformanceConstraint>& own =
      it != overrides.end() ? it->second : constraints;
  FEDRASH_RETURN_IF_ERROR(ValidateConstraints(own));
  if (baseline >= tensor.num_candidates()) {
    return absl::InvalidArgumentError("baseline index out of range");
  }
  FEDRASH_ASSIGN_OR_RETURN(size_t idx, tensor.IndexOf(client_id));
  RashomonDefinition def{DefinitionKind::kIndividual, 0.0, client_id};
  RashomonSelection s = NewSelection(tensor, def, own, baseline, {idx});
  for (size_t j = 0; j < tensor.num_candidates(); ++j) s.members[j] = s.pass[j][0];
  return s;
}

double RashomonRatio(const RashomonSelection& selection, size_t pool_size) {
  if (pool_size == 0) return 0.0;
  return static_cast<double>(selection.size()) / static_cast<double>(pool_size);
}

}  // namespace fedrash
