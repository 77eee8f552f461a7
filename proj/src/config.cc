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

#include "fedrash/config.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "absl/strings/str_format.h"
#include "fedrash/file_util.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

using nlohmann::json;

std::string JoinKey(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : absl::StrFormat("%s.%s", path, std::string(key));
}

std::string JoinIndex(const std::string& path, size_t i) {
  return absl::StrFormat("%s[%d]", path, i);
}

// Minimal recursive scan of an already-validated JSON document.
class LineIndexer {
 public:
  explicit LineIndexer(std::string_view text) : text_(text) {}

  absl::StatusOr<std::map<std::string, int>> Run() {
    Value("");
    if (!ok_) return absl::InvalidArgumentError("malformed JSON");
    return std::move(lines_);
  }

 private:
  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }
  bool Peek(char c) {
    SkipSpace();
    return pos_ < text_.size() && text_[pos_] == c;
  }
  std::string String() {
    std::string out;
    ++pos_;  // Opening quote.
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
      out.push_back(text_[pos_++]);
    }
    ++pos_;
    return out;
  }
  void Value(const std::string& path) {
    SkipSpace();
    if (pos_ >= text_.size()) {
      ok_ = false;
      return;
    }
    lines_[path] = line_;
    const char c = text_[pos_];
    if (c == '{') {
      ++pos_;
      if (Peek('}')) {
        ++pos_;
        return;
      }
      while (ok_) {
        if (!Peek('"')) {
          ok_ = false;
          return;
        }
        const std::string key = String();
        if (!Peek(':')) {
          ok_ = false;
          return;
        }
        ++pos_;
        Value(JoinKey(path, key));
        if (Peek(',')) {
          ++pos_;
          continue;
        }
        if (Peek('}')) {
          ++pos_;
          return;
        }
        ok_ = false;
      }
    } else if (c == '[') {
      ++pos_;
      if (Peek(']')) {
        ++pos_;
        return;
      }
      for (size_t i = 0; ok_; ++i) {
        Value(JoinIndex(path, i));
        if (Peek(',')) {
          ++pos_;
          continue;
        }
        if (Peek(']')) {
          ++pos_;
          return;
        }
        ok_ = false;
      }
    } else if (c == '"') {
      String();
    } else {
      while (pos_ < text_.size() && std::string_view(",]} \t\r\n").find(text_[pos_]) ==
                                        std::string_view::npos) {
        ++pos_;
      }
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  bool ok_ = true;
  std::map<std::string, int> lines_;
};

struct FieldError {
  std::string path;
  std::string message;
};

// Reads one JSON object, recording the first error and rejecting members it
// was never asked about.
class Section {
 public:
  Section(const json* node, std::string path, std::optional<FieldError>* error)
      : node_(node), path_(std::move(path)), error_(error) {
    if (node_ != nullptr && !node_->is_object()) Fail(path_, "expected an object");
  }

  bool present() const { return node_ != nullptr && node_->is_object(); }
  bool Has(std::string_view key) const {
    return present() && node_->contains(std::string(key));
  }
  const std::string& path() const { return path_; }

  template <typename T>
  void Get(std::string_view key, T& out) {
    const json* v = Lookup(key);
    if (v != nullptr) Convert(*v, JoinKey(path_, key), out);
  }

  Section Child(std::string_view key) { return Section(Lookup(key), JoinKey(path_, key), error_); }

  void Finish() {
    if (!present()) return;
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.contains(key)) Fail(JoinKey(path_, key), "unknown field");
    }
  }

  void Fail(const std::string& path, const std::string& message) {
    if (!error_->has_value()) *error_ = FieldError{path, message};
  }

 private:
  const json* Lookup(std::string_view key) {
    seen_.insert(std::string(key));
    if (!present()) return nullptr;
    auto it = node_->find(std::string(key));
    return it == node_->end() ? nullptr : &*it;
  }

  void Convert(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) return Fail(path, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) Fail(path, "must be finite");
  }
  void Convert(const json& v, const std::string& path, int& out) {
    if (!v.is_number_integer()) return Fail(path, "expected an integer");
    const int64_t x = v.get<int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) return Fail(path, "integer out of range");
    out = static_cast<int>(x);
  }
  void Convert(const json& v, const std::string& path, uint64_t& out) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<int64_t>() < 0)) {
      return Fail(path, "expected a nonnegative integer");
    }
    out = v.get<uint64_t>();
  }
  void Convert(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) return Fail(path, "expected true or false");
    out = v.get<bool>();
  }
  void Convert(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) return Fail(path, "expected a string");
    out = v.get<std::string>();
  }
  template <typename T>
  void Convert(const json& v, const std::string& path, std::optional<T>& out) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    T value{};
    Convert(v, path, value);
    out = value;
  }
  template <typename T>
  void Convert(const json& v, const std::string& path, std::vector<T>& out) {
    if (!v.is_array()) return Fail(path, "expected an array");
    out.clear();
    for (size_t i = 0; i < v.size(); ++i) {
      T value{};
      Convert(v[i], JoinIndex(path, i), value);
      out.push_back(value);
    }
  }

  const json* node_;
  std::string path_;
  std::optional<FieldError>* error_;
  std::set<std::string> seen_;
};

template <typename T>
bool OneOf(const T& value, std::initializer_list<T> options) {
  return std::find(options.begin(), options.end(), value) != options.end();
}

void ReadData(Section s, DataSection& d) {
  s.Get("source", d.source);
  if (!OneOf<std::string>(d.source, {"synthetic", "csv"})) {
    s.Fail(JoinKey(s.path(), "source"), "must be \"synthetic\" or \"csv\"");
  }
  Section syn = s.Child("synthetic");
  syn.Get("n_samples", d.n_samples);
  syn.Get("d_in", d.d_in);
  syn.Get("d_out", d.d_out);
  syn.Get("separation", d.separation);
  syn.Get("sensitive_bias", d.sensitive_bias);
  syn.Finish();
  Section csv = s.Child("csv");
  csv.Get("path", d.csv_path);
  csv.Get("schema", d.schema_path);
  csv.Get("label_column", d.label_column);
  csv.Get("sensitive_column", d.sensitive_column);
  csv.Finish();
  Section part = s.Child("partition");
  part.Get("n_clients", d.n_clients);
  part.Get("alpha", d.alpha);
  part.Get("max_retries", d.max_retries);
  Section splits = part.Child("splits");
  splits.Get("train", d.splits.train);
  splits.Get("validation", d.splits.validation);
  splits.Get("test", d.splits.test);
  splits.Finish();
  part.Finish();
  s.Finish();

  const std::string p = s.path();
  if (d.source == "synthetic") {
    if (d.n_samples < 1) s.Fail(p + ".synthetic.n_samples", "must be >= 1");
    if (d.d_in < 1) s.Fail(p + ".synthetic.d_in", "must be >= 1");
    if (d.d_out < 2) s.Fail(p + ".synthetic.d_out", "must be >= 2");
    if (!(d.separation >= 0)) s.Fail(p + ".synthetic.separation", "must be >= 0");
    if (d.sensitive_bias && std::abs(*d.sensitive_bias) > 0.5) {
      s.Fail(p + ".synthetic.sensitive_bias", "must lie in [-0.5, 0.5]");
    }
  } else {
    if (d.csv_path.empty()) s.Fail(p + ".csv.path", "required when source is \"csv\"");
    if (d.schema_path.empty()) s.Fail(p + ".csv.schema", "required when source is \"csv\"");
  }
  if (d.n_clients < 1) s.Fail(p + ".partition.n_clients", "must be >= 1");
  if (!(d.alpha > 0)) s.Fail(p + ".partition.alpha", "must be > 0");
  if (d.max_retries < 1) s.Fail(p + ".partition.max_retries", "must be >= 1");
  const double total = d.splits.train + d.splits.validation + d.splits.test;
  if (d.splits.train <= 0 || d.splits.validation < 0 || d.splits.test <= 0 ||
      std::abs(total - 1.0) > 1e-9) {
    s.Fail(p + ".partition.splits", "fractions must be positive and sum to 1");
  }
}

void ReadPool(Section s, PoolSection& pool) {
  s.Get("n_seeds", pool.n_seeds);
  s.Get("participation_ratios", pool.participation_ratios);
  s.Get("local_epochs", pool.local_epochs);
  Section t = s.Child("training");
  FedConfig& f = pool.training;
  t.Get("rounds", f.rounds);
  t.Get("lr", f.lr);
  t.Get("momentum", f.momentum);
  t.Get("batch_size", f.batch_size);
  std::string algorithm = "fedavg";
  t.Get("algorithm", algorithm);
  std::string model = "linear";
  t.Get("model", model);
  t.Get("hidden_units", f.hidden_units);
  t.Get("weights_over_all_clients", f.weights_over_all_clients);
  t.Finish();
  s.Finish();

  const std::string p = s.path();
  if (algorithm == "fedavg") {
    f.algorithm = FedAlgorithm::kFedAvg;
  } else if (algorithm == "fedsgd") {
    f.algorithm = FedAlgorithm::kFedSgd;
  } else {
    s.Fail(p + ".training.algorithm", "must be \"fedavg\" or \"fedsgd\"");
  }
  if (model == "linear") {
    f.model = ArchKind::kLinear;
  } else if (model == "mlp") {
    f.model = ArchKind::kMlp;
    if (f.hidden_units < 1) s.Fail(p + ".training.hidden_units", "must be >= 1 for mlp");
  } else {
    s.Fail(p + ".training.model", "must be \"linear\" or \"mlp\"");
  }
  if (pool.n_seeds < 1) s.Fail(p + ".n_seeds", "must be >= 1");
  if (pool.participation_ratios.empty()) s.Fail(p + ".participation_ratios", "must be nonempty");
  for (size_t i = 0; i < pool.participation_ratios.size(); ++i) {
    const double r = pool.participation_ratios[i];
    if (!(r > 0 && r <= 1)) s.Fail(JoinIndex(p + ".participation_ratios", i), "must lie in (0, 1]");
  }
  if (pool.local_epochs.empty()) s.Fail(p + ".local_epochs", "must be nonempty");
  for (size_t i = 0; i < pool.local_epochs.size(); ++i) {
    if (pool.local_epochs[i] < 1) s.Fail(JoinIndex(p + ".local_epochs", i), "must be >= 1");
  }
  FedConfig probe = f;
  probe.participation_ratio = 1.0;
  probe.local_epochs = 1;
  if (absl::Status st = probe.Validate(); !st.ok()) {
    s.Fail(p + ".training", std::string(st.message()));
  }
}

bool SortedAscending(const std::vector<double>& v) {
  return std::is_sorted(v.begin(), v.end());
}

void ReadRashomon(Section s, RashomonSection& r) {
  s.Get("epsilons", r.epsilons);
  s.Get("t_values", r.t_values);
  s.Get("definitions", r.definitions);
  s.Get("eval_clients", r.eval_clients);
  s.Get("individual_clients", r.individual_clients);
  std::string aggregation = "weighted_mean";
  s.Get("aggregation", aggregation);
  s.Finish();

  const std::string p = s.path();
  if (r.epsilons.empty()) s.Fail(p + ".epsilons", "must be nonempty");
  for (size_t i = 0; i < r.epsilons.size(); ++i) {
    if (!(r.epsilons[i] >= 0)) s.Fail(JoinIndex(p + ".epsilons", i), "must be >= 0");
    if (i > 0 && r.epsilons[i] <= r.epsilons[i - 1]) {
      s.Fail(JoinIndex(p + ".epsilons", i), "epsilon grid must be strictly ascending");
    }
  }
  for (size_t i = 0; i < r.t_values.size(); ++i) {
    if (!(r.t_values[i] > 0 && r.t_values[i] <= 1)) {
      s.Fail(JoinIndex(p + ".t_values", i), "must lie in (0, 1]");
    }
  }
  if (!SortedAscending(r.t_values)) s.Fail(p + ".t_values", "must be ascending");
  for (size_t i = 0; i < r.definitions.size(); ++i) {
    if (!OneOf<std::string>(r.definitions[i], {"global", "t_agreement", "individual"})) {
      s.Fail(JoinIndex(p + ".definitions", i),
             "must be \"global\", \"t_agreement\" or \"individual\"");
    }
  }
  if (r.definitions.empty()) s.Fail(p + ".definitions", "must be nonempty");
  if (std::count(r.definitions.begin(), r.definitions.end(), "t_agreement") > 0 &&
      r.t_values.empty()) {
    s.Fail(p + ".t_values", "required for the t_agreement definition");
  }
  if (r.individual_clients < 0) s.Fail(p + ".individual_clients", "must be >= 0");
  if (aggregation == "weighted_mean") {
    r.aggregation = Aggregation::kWeightedMean;
  } else if (aggregation == "mean") {
    r.aggregation = Aggregation::kMean;
  } else {
    s.Fail(p + ".aggregation", "must be \"weighted_mean\" or \"mean\"");
  }
}

void ReadMetrics(Section s, MetricsSection& m) {
  s.Get("metrics", m.metrics);
  std::string path = "both";
  s.Get("path", path);
  s.Get("dp_epsilon", m.dp_epsilon);
  s.Get("n_buckets", m.n_buckets);
  std::string seed_mode = "deterministic";
  s.Get("dp_seed_mode", seed_mode);
  s.Get("percentiles", m.percentiles);
  s.Get("tau", m.tau);
  s.Get("exponentiated_capacity", m.exponentiated_capacity);
  s.Get("capacity_tolerance", m.capacity.tolerance);
  s.Get("capacity_max_iters", m.capacity.max_iters);
  s.Finish();

  const std::string p = s.path();
  for (size_t i = 0; i < m.metrics.size(); ++i) {
    if (!OneOf<std::string>(m.metrics[i], {"ambiguity", "discrepancy", "disagreement", "vpr",
                                           "std", "rashomon_capacity"})) {
      s.Fail(JoinIndex(p + ".metrics", i), "unknown metric");
    }
  }
  if (path == "trusted") {
    m.path = MetricPath::kTrusted;
  } else if (path == "dp") {
    m.path = MetricPath::kDp;
  } else if (path == "both") {
    m.path = MetricPath::kBoth;
  } else {
    s.Fail(p + ".path", "must be \"trusted\", \"dp\" or \"both\"");
  }
  if (seed_mode == "deterministic") {
    m.dp_deterministic_seed = true;
  } else if (seed_mode == "entropy") {
    m.dp_deterministic_seed = false;
  } else {
    s.Fail(p + ".dp_seed_mode", "must be \"deterministic\" or \"entropy\"");
  }
  if (!(m.dp_epsilon > 0)) s.Fail(p + ".dp_epsilon", "must be > 0");
  if (m.n_buckets < 1) s.Fail(p + ".n_buckets", "must be >= 1");
  if (m.percentiles.empty()) s.Fail(p + ".percentiles", "must be nonempty");
  for (size_t i = 0; i < m.percentiles.size(); ++i) {
    if (!(m.percentiles[i] > 0 && m.percentiles[i] <= 100)) {
      s.Fail(JoinIndex(p + ".percentiles", i), "must lie in (0, 100]");
    }
  }
  if (!(m.tau >= 0 && m.tau <= 1)) s.Fail(p + ".tau", "must lie in [0, 1]");
  if (!(m.capacity.tolerance > 0)) s.Fail(p + ".capacity_tolerance", "must be > 0");
  if (m.capacity.max_iters < 1) s.Fail(p + ".capacity_max_iters", "must be >= 1");
}

std::string MetricPathName(MetricPath p) {
  switch (p) {
    case MetricPath::kTrusted:
      return "trusted";
    case MetricPath::kDp:
      return "dp";
    case MetricPath::kBoth:
      return "both";
  }
  return "both";
}

}  // namespace

absl::StatusOr<std::map<std::string, int>> IndexJsonLines(std::string_view text) {
  return LineIndexer(text).Run();
}

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(std::string_view text,
                                                       const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const size_t offset = std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
    return absl::InvalidArgumentError(
        absl::StrFormat("config is not valid JSON (line %d): %s", line, e.what()));
  }

  ExperimentConfig cfg;
  cfg.base_dir = base_dir;
  std::optional<FieldError> error;
  Section root(&doc, "", &error);
  ReadData(root.Child("data"), cfg.data);
  ReadPool(root.Child("pool"), cfg.pool);
  ReadRashomon(root.Child("rashomon"), cfg.rashomon);
  ReadMetrics(root.Child("metrics"), cfg.metrics);
  if (root.Has("fairness")) {
    Section f = root.Child("fairness");
    FairnessSection fairness;
    f.Get("sample_k", fairness.sample_k);
    f.Finish();
    if (fairness.sample_k < 1) f.Fail("fairness.sample_k", "must be >= 1");
    cfg.fairness = fairness;
  }
  root.Get("output_dir", cfg.output_dir);
  root.Get("seed", cfg.seed);
  root.Finish();

  if (!error && cfg.data.source == "csv") {
    for (const auto& [field, value] :
         {std::pair{"data.csv.path", cfg.data.csv_path},
          std::pair{"data.csv.schema", cfg.data.schema_path}}) {
      if (!std::filesystem::exists(base_dir / value)) {
        error = FieldError{field, absl::StrFormat("file '%s' does not exist",
                                                  (base_dir / value).string())};
        break;
      }
    }
  }
  if (!error && cfg.data.source == "synthetic" && cfg.fairness.has_value() &&
      !cfg.data.sensitive_bias.has_value()) {
    error = FieldError{"fairness", "needs data.synthetic.sensitive_bias"};
  }
  if (!error && cfg.data.source == "csv" && cfg.fairness.has_value() &&
      !cfg.data.sensitive_column.has_value()) {
    error = FieldError{"fairness", "needs data.csv.sensitive_column"};
  }
  if (!error && !cfg.rashomon.eval_clients.empty()) {
    std::set<int> seen;
    for (size_t i = 0; i < cfg.rashomon.eval_clients.size(); ++i) {
      const int c = cfg.rashomon.eval_clients[i];
      if (c < 0 || c >= cfg.data.n_clients || !seen.insert(c).second) {
        error = FieldError{JoinIndex("rashomon.eval_clients", i),
                           "must be a distinct client id in [0, n_clients)"};
        break;
      }
    }
  }
  if (!error) return cfg;

  // Locate the field, falling back to the nearest enclosing path.
  FEDRASH_ASSIGN_OR_RETURN(auto lines, IndexJsonLines(text));
  std::string probe = error->path;
  std::optional<int> line;
  while (true) {
    if (auto it = lines.find(probe); it != lines.end()) {
      line = it->second;
      break;
    }
    const size_t cut = probe.find_last_of(".[");
    if (cut == std::string::npos) break;
    probe = probe.substr(0, cut);
  }
  const std::string where =
      line.has_value() ? absl::StrFormat(" (line %d)", *line) : std::string();
  return absl::InvalidArgumentError(absl::StrFormat(
      "config field '%s'%s: %s", error->path, where, error->message));
}

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(const std::filesystem::path& path) {
  FEDRASH_ASSIGN_OR_RETURN(std::string text, ReadFile(path));
  std::filesystem::path base = path.parent_path();
  if (base.empty()) base = ".";
  return ParseExperimentConfig(text, base);
}

nlohmann::json ExperimentConfig::ToJson() const {
  json j;
  json synthetic = {{"n_samples", data.n_samples},
                    {"d_in", data.d_in},
                    {"d_out", data.d_out},
                    {"separation", data.separation},
                    {"sensitive_bias", data.sensitive_bias.has_value()
                                           ? json(*data.sensitive_bias)
                                           : json(nullptr)}};
  json csv = {{"path", data.csv_path},
              {"schema", data.schema_path},
              {"label_column", data.label_column},
              {"sensitive_column", data.sensitive_column.has_value()
                                       ? json(*data.sensitive_column)
                                       : json(nullptr)}};
  j["data"] = {{"source", data.source},
               {"synthetic", synthetic},
               {"csv", csv},
               {"partition",
                {{"n_clients", data.n_clients},
                 {"alpha", data.alpha},
                 {"max_retries", data.max_retries},
                 {"splits",
                  {{"train", data.splits.train},
                   {"validation", data.splits.validation},
                   {"test", data.splits.test}}}}}};
  const FedConfig& f = pool.training;
  j["pool"] = {{"n_seeds", pool.n_seeds},
               {"participation_ratios", pool.participation_ratios},
               {"local_epochs", pool.local_epochs},
               {"training",
                {{"rounds", f.rounds},
                 {"lr", f.lr},
                 {"momentum", f.momentum},
                 {"batch_size", f.batch_size},
                 {"algorithm", f.algorithm == FedAlgorithm::kFedAvg ? "fedavg" : "fedsgd"},
                 {"model", f.model == ArchKind::kLinear ? "linear" : "mlp"},
                 {"hidden_units", f.hidden_units},
                 {"weights_over_all_clients", f.weights_over_all_clients}}}};
  j["rashomon"] = {{"epsilons", rashomon.epsilons},
                   {"t_values", rashomon.t_values},
                   {"definitions", rashomon.definitions},
                   {"eval_clients", rashomon.eval_clients},
                   {"individual_clients", rashomon.individual_clients},
                   {"aggregation", rashomon.aggregation == Aggregation::kWeightedMean
                                       ? "weighted_mean"
                                       : "mean"}};
  j["metrics"] = {{"metrics", metrics.metrics},
                  {"path", MetricPathName(metrics.path)},
                  {"dp_epsilon", metrics.dp_epsilon},
                  {"n_buckets", metrics.n_buckets},
                  {"dp_seed_mode", metrics.dp_deterministic_seed ? "deterministic" : "entropy"},
                  {"percentiles", metrics.percentiles},
                  {"tau", metrics.tau},
                  {"exponentiated_capacity", metrics.exponentiated_capacity},
                  {"capacity_tolerance", metrics.capacity.tolerance},
                  {"capacity_max_iters", metrics.capacity.max_iters}};
  if (fairness.has_value()) j["fairness"] = {{"sample_k", fairness->sample_k}};
  j["seed"] = seed;
  return j;
}

}  // namespace fedrash
