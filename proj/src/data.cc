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

#include "fedrash/data.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedrash/csv.h"
#include "fedrash/file_util.h"
#include "fedrash/rng.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

std::optional<double> ParseNumber(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

absl::Status CellError(size_t row, const std::string& column,
                       std::string_view value, std::string_view what) {
  // Row numbers are 1-based file lines; the header is line 1.
  return absl::InvalidArgumentError(absl::StrFormat(
      "line %d, column '%s': %s ('%s')", row + 2, column, std::string(what), std::string(value)));
}

void AppendU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void AppendBatch(std::string& out, const Batch& b) {
  AppendU64(out, b.features.rows());
  AppendU64(out, b.features.cols());
  for (double v : b.features.data()) AppendU64(out, std::bit_cast<uint64_t>(v));
  for (int y : b.labels) AppendU64(out, static_cast<uint64_t>(y));
}

std::string SplitCsv(const Batch& b, const std::vector<int>* sensitive) {
  std::string out;
  for (size_t j = 0; j < b.features.cols(); ++j) out += absl::StrFormat("f%d,", j);
  out += "label";
  if (sensitive != nullptr) out += ",sensitive";
  out += "\n";
  for (size_t r = 0; r < b.size(); ++r) {
    for (double v : b.features.Row(r)) {
      out += FormatDouble(v);
      out.push_back(',');
    }
    out += std::to_string(b.labels[r]);
    if (sensitive != nullptr) out += "," + std::to_string((*sensitive)[r]);
    out += "\n";
  }
  return out;
}

absl::StatusOr<Batch> ReadSplitCsv(const std::filesystem::path& path, int d_in,
                                   std::vector<int>* sensitive) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  FEDRASH_ASSIGN_OR_RETURN(std::vector<CsvRow> rows, ParseCsv(text));
  if (rows.empty()) {
    return absl::DataLossError(absl::StrFormat("%s: missing header", path.string()));
  }
  const size_t width = static_cast<size_t>(d_in) + 1 + (sensitive ? 1 : 0);
  Batch batch;
  std::vector<double> values;
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      return absl::DataLossError(absl::StrFormat(
          "%s line %d: expected %d fields, got %d", path.string(), r + 1, width,
          rows[r].size()));
    }
    for (size_t j = 0; j < width; ++j) {
      std::optional<double> v = ParseNumber(rows[r][j]);
      if (!v) {
        return absl::DataLossError(absl::StrFormat(
            "%s line %d field %d: not a number", path.string(), r + 1, j + 1));
      }
      if (j < static_cast<size_t>(d_in)) {
        values.push_back(*v);
      } else if (j == static_cast<size_t>(d_in)) {
        batch.labels.push_back(static_cast<int>(*v));
      } else {
        sensitive->push_back(static_cast<int>(*v));
      }
    }
  }
  batch.features = Matrix(batch.labels.size(), d_in, std::move(values));
  return batch;
}

}  // namespace

absl::StatusOr<CsvSchema> ParseSchema(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("schema must be a JSON object");
  }
  CsvSchema schema;
  for (const auto& [name, value] : doc.items()) {
    ColumnSpec spec;
    if (value.is_string() && value.get<std::string>() == "numeric") {
      spec.kind = ColumnSpec::Kind::kNumeric;
    } else if (value.is_object() && value.contains("numeric")) {
      spec.kind = ColumnSpec::Kind::kNumeric;
    } else if (value.is_object() && value.contains("categorical") &&
               value["categorical"].is_array()) {
      spec.kind = ColumnSpec::Kind::kCategorical;
      for (const auto& level : value["categorical"]) {
        if (!level.is_string()) {
          return absl::InvalidArgumentError(absl::StrFormat(
              "schema column '%s': categorical levels must be strings", name));
        }
        spec.levels.push_back(level.get<std::string>());
      }
      if (spec.levels.empty()) {
        return absl::InvalidArgumentError(
            absl::StrFormat("schema column '%s': no categorical levels", name));
      }
    } else {
      return absl::InvalidArgumentError(absl::StrFormat(
          "schema column '%s': expected \"numeric\" or {\"categorical\": [...]}",
          name));
    }
    schema.emplace_back(name, std::move(spec));
  }
  return schema;
}

absl::StatusOr<CsvSchema> LoadSchemaFile(const std::filesystem::path& path) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s: schema is not valid JSON", path.string()));
  }
  return ParseSchema(doc);
}

absl::StatusOr<Dataset> LoadCsv(const std::filesystem::path& path,
                                const std::string& label_column,
                                const std::optional<std::string>& sensitive_column,
                                const CsvSchema& schema) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  auto parsed = ParseCsv(text);
  if (!parsed.ok()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s: %s", path.string(), parsed.status().message()));
  }
  std::vector<CsvRow> rows = std::move(parsed).value();
  // Drop blank lines.
  std::erase_if(rows, [](const CsvRow& r) { return r.size() == 1 && r[0].empty(); });
  if (rows.empty()) {
    return absl::InvalidArgumentError(absl::StrFormat("%s: empty file", path.string()));
  }
  const CsvRow header = rows.front();
  const size_t n = rows.size() - 1;
  if (n == 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s: header present but no data rows", path.string()));
  }
  for (size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s line %d: expected %d fields, got %d", path.string(), r + 1,
          header.size(), rows[r].size()));
    }
  }
  std::map<std::string, size_t> column_index;
  for (size_t j = 0; j < header.size(); ++j) column_index[header[j]] = j;
  auto find_spec = [&](const std::string& name) -> const ColumnSpec* {
    for (const auto& [col, spec] : schema) {
      if (col == name) return &spec;
    }
    return nullptr;
  };
  for (const auto& [col, spec] : schema) {
    if (!column_index.contains(col)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s: schema column '%s' missing from header", path.string(), col));
    }
  }
  if (!column_index.contains(label_column)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s: label column '%s' missing from header", path.string(), label_column));
  }
  if (sensitive_column && !column_index.contains(*sensitive_column)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s: sensitive column '%s' missing from header", path.string(),
        *sensitive_column));
  }

  Dataset out;
  // Labels.
  {
    const size_t j = column_index[label_column];
    std::vector<std::string> levels;
    const ColumnSpec* spec = find_spec(label_column);
    if (spec != nullptr && spec->kind == ColumnSpec::Kind::kCategorical) {
      levels = spec->levels;
    } else {
      std::set<std::string> distinct;
      for (size_t r = 1; r <= n; ++r) distinct.insert(rows[r][j]);
      levels.assign(distinct.begin(), distinct.end());
    }
    if (levels.size() < 2) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s: label column '%s' needs at least two classes", path.string(),
          label_column));
    }
    for (size_t r = 1; r <= n; ++r) {
      auto it = std::find(levels.begin(), levels.end(), rows[r][j]);
      if (it == levels.end()) {
        return CellError(r - 1, label_column, rows[r][j], "unknown label level");
      }
      out.labels.push_back(static_cast<int>(it - levels.begin()));
    }
    out.d_out = static_cast<int>(levels.size());
  }
  // Sensitive attribute.
  if (sensitive_column) {
    const size_t j = column_index[*sensitive_column];
    const ColumnSpec* spec = find_spec(*sensitive_column);
    std::vector<int> z;
    for (size_t r = 1; r <= n; ++r) {
      const std::string& cell = rows[r][j];
      if (spec != nullptr && spec->kind == ColumnSpec::Kind::kCategorical) {
        if (spec->levels.size() != 2) {
          return absl::InvalidArgumentError(absl::StrFormat(
              "sensitive column '%s' must have exactly two levels", *sensitive_column));
        }
        auto it = std::find(spec->levels.begin(), spec->levels.end(), cell);
        if (it == spec->levels.end()) {
          return CellError(r - 1, *sensitive_column, cell, "unknown level");
        }
        z.push_back(static_cast<int>(it - spec->levels.begin()));
      } else {
        std::optional<double> v = ParseNumber(cell);
        if (!v || (*v != 0.0 && *v != 1.0)) {
          return CellError(r - 1, *sensitive_column, cell, "expected 0 or 1");
        }
        z.push_back(static_cast<int>(*v));
      }
    }
    out.sensitive = std::move(z);
  }
  // Features, in header order.
  std::vector<std::vector<double>> columns;
  for (size_t j = 0; j < header.size(); ++j) {
    const std::string& name = header[j];
    if (name == label_column || (sensitive_column && name == *sensitive_column)) {
      continue;
    }
    const ColumnSpec* spec = find_spec(name);
    if (spec == nullptr) continue;
    if (spec->kind == ColumnSpec::Kind::kNumeric) {
      std::vector<double> col(n);
      for (size_t r = 1; r <= n; ++r) {
        std::optional<double> v = ParseNumber(rows[r][j]);
        if (!v) return CellError(r - 1, name, rows[r][j], "not a number");
        col[r - 1] = *v;
      }
      const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
      const double min = *lo;
      const double range = *hi - *lo;
      for (double& v : col) v = range > 0.0 ? (v - min) / range : 0.0;
      columns.push_back(std::move(col));
    } else {
      std::vector<std::vector<double>> indicators(spec->levels.size(),
                                                  std::vector<double>(n, 0.0));
      for (size_t r = 1; r <= n; ++r) {
        auto it = std::find(spec->levels.begin(), spec->levels.end(), rows[r][j]);
        if (it == spec->levels.end()) {
          return CellError(r - 1, name, rows[r][j], "unknown categorical level");
        }
        indicators[it - spec->levels.begin()][r - 1] = 1.0;
      }
      for (auto& col : indicators) columns.push_back(std::move(col));
    }
  }
  if (columns.empty()) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s: no feature columns selected by the schema", path.string()));
  }
  out.features = Matrix(n, columns.size());
  for (size_t c = 0; c < columns.size(); ++c) {
    for (size_t r = 0; r < n; ++r) out.features(r, c) = columns[c][r];
  }
  return out;
}

absl::StatusOr<Dataset> SynthGaussian(int n, int d_in, int d_out,
                                      double class_separation, uint64_t seed) {
  if (d_out < 2) return absl::InvalidArgumentError("d_out must be >= 2");
  if (d_in < 1) return absl::InvalidArgumentError("d_in must be >= 1");
  if (n < d_out) return absl::InvalidArgumentError("n must be >= d_out");
  if (!(class_separation >= 0.0)) {
    return absl::InvalidArgumentError("class_separation must be >= 0");
  }
  CounterRng rng = CounterRng(seed).Split(RngStream::kSynthetic);
  std::vector<double> direction(d_in);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : direction) v = rng.Normal();
    norm = std::sqrt(std::inner_product(direction.begin(), direction.end(),
                                        direction.begin(), 0.0));
  }
  for (double& v : direction) v /= norm;

  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % d_out;
  rng.Shuffle(std::span<int>(labels));

  Dataset out;
  out.d_out = d_out;
  out.features = Matrix(n, d_in);
  const double centre = 0.5 * (d_out - 1);
  for (int i = 0; i < n; ++i) {
    const double offset = (labels[i] - centre) * class_separation;
    for (int j = 0; j < d_in; ++j) {
      out.features(i, j) = offset * direction[j] + rng.Normal();
    }
  }
  out.labels = std::move(labels);
  return out;
}

absl::Status AttachSyntheticSensitive(Dataset& data, double bias, uint64_t seed) {
  if (!(std::abs(bias) <= 0.5)) {
    return absl::InvalidArgumentError("sensitive bias must be in [-0.5, 0.5]");
  }
  CounterRng rng = CounterRng(seed).Split(RngStream::kSynthetic).Split(1);
  std::vector<int> z(data.size());
  for (size_t i = 0; i < z.size(); ++i) {
    const double p = 0.5 + ((data.labels[i] % 2 == 1) ? bias : -bias);
    z[i] = rng.Uniform() < p ? 1 : 0;
  }
  data.sensitive = std::move(z);
  return absl::OkStatus();
}

bool FederationData::has_sensitive() const {
  return !shards.empty() &&
         std::all_of(shards.begin(), shards.end(),
                     [](const ClientShard& s) { return s.sensitive.has_value(); });
}

std::string FederationData::Digest() const {
  std::string blob;
  AppendU64(blob, static_cast<uint64_t>(d_in));
  AppendU64(blob, static_cast<uint64_t>(d_out));
  for (const ClientShard& s : shards) {
    AppendU64(blob, static_cast<uint64_t>(s.client_id));
    AppendBatch(blob, s.train);
    AppendBatch(blob, s.validation);
    AppendBatch(blob, s.test);
    if (s.sensitive) {
      for (int z : *s.sensitive) AppendU64(blob, static_cast<uint64_t>(z));
    }
  }
  return Sha256Hex(blob);
}

absl::StatusOr<FederationData> PartitionDirichlet(const Dataset& data,
                                                  const PartitionOptions& options) {
  const int n_clients = options.n_clients;
  const SplitFractions& f = options.splits;
  if (n_clients < 1) return absl::InvalidArgumentError("n_clients must be >= 1");
  if (!(options.alpha > 0.0)) return absl::InvalidArgumentError("alpha must be > 0");
  if (!(f.train > 0.0 && f.validation > 0.0 && f.test > 0.0) ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    return absl::InvalidArgumentError(
        "split_fractions must be three positive values summing to 1");
  }
  if (data.size() == 0 || data.features.rows() != data.size()) {
    return absl::InvalidArgumentError("dataset is empty or misaligned");
  }
  if (data.sensitive && data.sensitive->size() != data.size()) {
    return absl::InvalidArgumentError("sensitive column misaligned with rows");
  }
  const int d_out = data.d_out;
  const size_t n = data.size();
  const size_t min_per_split = static_cast<size_t>(std::max(3, d_out));

  CounterRng rng = CounterRng(options.seed).Split(RngStream::kPartition);
  std::vector<std::vector<size_t>> class_rows(d_out);
  for (size_t i = 0; i < n; ++i) {
    const int y = data.labels[i];
    if (y < 0 || y >= d_out) {
      return absl::InvalidArgumentError(absl::StrFormat("label %d out of range", y));
    }
    class_rows[y].push_back(i);
  }
  for (auto& rows : class_rows) rng.Shuffle(std::span<size_t>(rows));

  auto split_sizes = [&](size_t total) {
    const size_t n_val = static_cast<size_t>(std::floor(f.validation * total));
    const size_t n_test = static_cast<size_t>(std::floor(f.test * total));
    return std::array<size_t, 3>{total - n_val - n_test, n_val, n_test};
  };

  // counts[c][k]: rows of class k given to client c.
  std::vector<std::vector<size_t>> counts;
  bool feasible = false;
  const double fair_share = static_cast<double>(n) / n_clients;
  for (int attempt = 0; attempt < options.max_retries && !feasible; ++attempt) {
    counts.assign(n_clients, std::vector<size_t>(d_out, 0));
    std::vector<size_t> held(n_clients, 0);
    for (int k = 0; k < d_out; ++k) {
      std::vector<double> p = rng.Dirichlet(options.alpha, n_clients);
      std::vector<double> capped(n_clients);
      double total = 0.0;
      for (int c = 0; c < n_clients; ++c) {
        capped[c] = static_cast<double>(held[c]) < fair_share ? p[c] : 0.0;
        total += capped[c];
      }
      if (total > 0.0) {
        for (int c = 0; c < n_clients; ++c) p[c] = capped[c] / total;
      }
      const size_t n_k = class_rows[k].size();
      double cumulative = 0.0;
      size_t assigned = 0;
      for (int c = 0; c < n_clients; ++c) {
        cumulative += p[c];
        const size_t upto =
            c + 1 == n_clients
                ? n_k
                : std::min(n_k, static_cast<size_t>(std::floor(cumulative * n_k)));
        counts[c][k] = upto > assigned ? upto - assigned : 0;
        assigned = std::max(assigned, upto);
        held[c] += counts[c][k];
      }
    }
    feasible = true;
    for (int c = 0; c < n_clients && feasible; ++c) {
      for (size_t s : split_sizes(held[c])) {
        if (s < min_per_split) {
          feasible = false;
          break;
        }
      }
    }
  }
  if (!feasible) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "could not give each of %d clients at least %d rows per split after %d "
        "Dirichlet(alpha=%g) draws over %d rows",
        n_clients, min_per_split, options.max_retries, options.alpha, n));
  }

  FederationData out;
  out.d_in = static_cast<int>(data.features.cols());
  out.d_out = d_out;
  out.seed = options.seed;
  out.alpha = options.alpha;
  const Batch source{data.features, data.labels};
  std::vector<size_t> cursor(d_out, 0);
  for (int c = 0; c < n_clients; ++c) {
    std::vector<size_t> rows;
    for (int k = 0; k < d_out; ++k) {
      const auto begin = class_rows[k].begin() + cursor[k];
      rows.insert(rows.end(), begin, begin + counts[c][k]);
      cursor[k] += counts[c][k];
    }
    CounterRng client_rng = rng.Split(static_cast<uint64_t>(c));
    client_rng.Shuffle(std::span<size_t>(rows));
    const auto sizes = split_sizes(rows.size());
    std::span<const size_t> all(rows);
    ClientShard shard;
    shard.client_id = c;
    shard.train = source.SelectRows(all.subspan(0, sizes[0]));
    shard.validation = source.SelectRows(all.subspan(sizes[0], sizes[1]));
    std::span<const size_t> test_rows = all.subspan(sizes[0] + sizes[1]);
    shard.test = source.SelectRows(test_rows);
    if (data.sensitive) {
      std::vector<int> z;
      for (size_t r : test_rows) z.push_back((*data.sensitive)[r]);
      shard.sensitive = std::move(z);
    }
    out.total_test_count += shard.test.size();
    out.shards.push_back(std::move(shard));
  }
  return out;
}

absl::Status SaveFederationData(const FederationData& data,
                                const std::filesystem::path& dir) {
  FEDRASH_RETURN_IF_ERROR(EnsureDirectory(dir));
  nlohmann::json manifest;
  manifest["d_in"] = data.d_in;
  manifest["d_out"] = data.d_out;
  manifest["seed"] = data.seed;
  manifest["alpha"] = data.alpha;
  manifest["digest"] = data.Digest();
  manifest["has_sensitive"] = data.has_sensitive();
  nlohmann::json clients = nlohmann::json::array();
  for (const ClientShard& s : data.shards) {
    const std::string stem = absl::StrFormat("client_%d_", s.client_id);
    FEDRASH_RETURN_IF_ERROR(
        WriteFileAtomic(dir / (stem + "train.csv"), SplitCsv(s.train, nullptr)));
    FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(dir / (stem + "validation.csv"),
                                            SplitCsv(s.validation, nullptr)));
    FEDRASH_RETURN_IF_ERROR(WriteFileAtomic(
        dir / (stem + "test.csv"),
        SplitCsv(s.test, s.sensitive ? &*s.sensitive : nullptr)));
    clients.push_back({{"client_id", s.client_id},
                       {"train", s.train.size()},
                       {"validation", s.validation.size()},
                       {"test", s.test.size()}});
  }
  manifest["clients"] = std::move(clients);
  return WriteFileAtomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

absl::StatusOr<FederationData> LoadFederationData(const std::filesystem::path& dir) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(dir / "manifest.json"));
  nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
  if (manifest.is_discarded()) {
    return absl::DataLossError(absl::StrFormat("%s: corrupt manifest", dir.string()));
  }
  FederationData out;
  try {
    out.d_in = manifest.at("d_in").get<int>();
    out.d_out = manifest.at("d_out").get<int>();
    out.seed = manifest.at("seed").get<uint64_t>();
    out.alpha = manifest.at("alpha").get<double>();
    const bool has_sensitive = manifest.at("has_sensitive").get<bool>();
    int expected_id = 0;
    for (const auto& client : manifest.at("clients")) {
      ClientShard s;
      s.client_id = client.at("client_id").get<int>();
      if (s.client_id != expected_id++) {
        return absl::DataLossError("client ids must be contiguous from 0");
      }
      const std::string stem = absl::StrFormat("client_%d_", s.client_id);
      FEDRASH_ASSIGN_OR_RETURN(s.train,
                               ReadSplitCsv(dir / (stem + "train.csv"), out.d_in, nullptr));
      FEDRASH_ASSIGN_OR_RETURN(
          s.validation, ReadSplitCsv(dir / (stem + "validation.csv"), out.d_in, nullptr));
      std::vector<int> z;
      FEDRASH_ASSIGN_OR_RETURN(
          s.test, ReadSplitCsv(dir / (stem + "test.csv"), out.d_in,
                               has_sensitive ? &z : nullptr));
      if (has_sensitive) s.sensitive = std::move(z);
      out.total_test_count += s.test.size();
      out.shards.push_back(std::move(s));
    }
    if (manifest.at("digest").get<std::string>() != out.Digest()) {
      return absl::DataLossError(
          absl::StrFormat("%s: shard contents do not match manifest digest", dir.string()));
    }
  } catch (const nlohmann::json::exception& e) {
    return absl::DataLossError(
        absl::StrFormat("%s: malformed manifest: %s", dir.string(), e.what()));
  }
  return out;
}

}  // namespace fedrash
