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

#ifndef FEDRASH_DATA_H_
#define FEDRASH_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/model.h"
#include "json.hpp"

namespace fedrash {

// A labelled table, optionally with one binary sensitive attribute per row.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::optional<std::vector<int>> sensitive;
  int d_out = 0;

  size_t size() const { return labels.size(); }
};

struct ColumnSpec {
  enum class Kind { kNumeric, kCategorical };
  Kind kind = Kind::kNumeric;
  std::vector<std::string> levels;  // kCategorical only, in encoding order.
};

// Column name -> spec, in the order the names appear in the schema document.
using CsvSchema = std::vector<std::pair<std::string, ColumnSpec>>;

// Accepts {"col": "numeric" | {"numeric": ...} | {"categorical": [levels]}}.
absl::StatusOr<CsvSchema> ParseSchema(const nlohmann::json& doc);
absl::StatusOr<CsvSchema> LoadSchemaFile(const std::filesystem::path& path);

// Loads a headed CSV file. Feature columns are the schema columns other than
// the label and sensitive columns, emitted in header order; categorical
// columns expand to one indicator per level and numeric columns are min-max
// scaled to [0, 1] over the whole file (a constant column maps to 0). Header
// columns missing from the schema are ignored.
//
// The label column is decoded with its schema levels when it is listed as
// categorical, otherwise with its distinct values in sorted order. The
// sensitive column must be categorical with two levels or hold 0/1.
absl::StatusOr<Dataset> LoadCsv(const std::filesystem::path& path,
                                const std::string& label_column,
                                const std::optional<std::string>& sensitive_column,
                                const CsvSchema& schema);

// Class-conditional unit-variance Gaussians whose means lie on a random unit
// direction, consecutive classes `class_separation` apart and centred on the
// origin. Labels are balanced (counts differ by at most one) and shuffled.
absl::StatusOr<Dataset> SynthGaussian(int n, int d_in, int d_out,
                                      double class_separation, uint64_t seed);

// Draws a binary sensitive attribute with P(z = 1 | y) = 0.5 + bias when
// y is odd and 0.5 - bias otherwise. Requires |bias| <= 0.5.
absl::Status AttachSyntheticSensitive(Dataset& data, double bias, uint64_t seed);

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct ClientShard {
  int client_id = 0;
  Batch train;
  Batch validation;
  Batch test;
  // Aligned with test rows when present.
  std::optional<std::vector<int>> sensitive;

  size_t test_count() const { return test.size(); }
};

struct FederationData {
  std::vector<ClientShard> shards;
  int d_in = 0;
  int d_out = 0;
  size_t total_test_count = 0;
  uint64_t seed = 0;
  double alpha = 0.0;

  size_t num_clients() const { return shards.size(); }
  bool has_sensitive() const;
  // SHA-256 over the shard contents (not seed or alpha).
  std::string Digest() const;
};

struct PartitionOptions {
  int n_clients = 10;
  double alpha = 0.5;
  SplitFractions splits;
  uint64_t seed = 0;
  int max_retries = 10000;
};

// Dirichlet label-skew partitioning. For every class, the class's rows are
// divided among clients by proportions drawn from Dirichlet(alpha), with the
// usual balancing rule that clients already holding at least n / n_clients
// rows get no further share. Allocations are redrawn until every client has
// at least max(3, d_out) rows in each of its train, validation and test
// splits. Within a client, rows are shuffled and cut by `splits`.
absl::StatusOr<FederationData> PartitionDirichlet(const Dataset& data,
                                                  const PartitionOptions& options);

// Directory layout: manifest.json plus client_<id>_{train,validation,test}.csv.
absl::Status SaveFederationData(const FederationData& data,
                                const std::filesystem::path& dir);
absl::StatusOr<FederationData> LoadFederationData(const std::filesystem::path& dir);

}  // namespace fedrash

#endif  // FEDRASH_DATA_H_
