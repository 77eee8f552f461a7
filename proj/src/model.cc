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

#include "fedrash/model.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "fedrash/status_macros.h"

namespace fedrash {
namespace {

struct LayerShape {
  size_t in;
  size_t out;
  size_t offset;  // Start of the weight block; biases follow at offset + in*out.
};

std::vector<LayerShape> Layers(const Architecture& arch) {
  if (arch.kind == ArchKind::kLinear) return {{arch.d_in, arch.d_out, 0}};
  const size_t first = static_cast<size_t>(arch.d_hidden) * (arch.d_in + 1);
  return {{arch.d_in, arch.d_hidden, 0}, {arch.d_hidden, arch.d_out, first}};
}

// Writes softmax(logits) into `probs` and returns log-sum-exp(logits).
double StableSoftmax(std::span<const double> logits, std::span<double> probs) {
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - max);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
  return max + std::log(sum);
}

void AffineForward(std::span<const double> w, const LayerShape& layer,
                   std::span<const double> x, std::span<double> out) {
  const double* weights = w.data() + layer.offset;
  const double* bias = weights + layer.in * layer.out;
  for (size_t o = 0; o < layer.out; ++o) {
    double acc = bias[o];
    const double* row = weights + o * layer.in;
    for (size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
    out[o] = acc;
  }
}

// Sums per-row cross-entropy and its gradient over `rows` into `grad` (not
// divided by the row count). Returns the summed loss.
double AccumulateGradient(const Architecture& arch, std::span<const double> w,
                          const Matrix& features, std::span<const int> labels,
                          std::span<const size_t> rows,
                          std::span<double> grad) {
  const auto layers = Layers(arch);
  std::vector<double> hidden_pre(arch.d_hidden);
  std::vector<double> hidden(arch.d_hidden);
  std::vector<double> hidden_grad(arch.d_hidden);
  std::vector<double> logits(arch.d_out);
  std::vector<double> probs(arch.d_out);
  double total = 0.0;

  for (size_t r : rows) {
    std::span<const double> x = features.Row(r);
    const LayerShape& out_layer = layers.back();
    std::span<const double> out_input = x;
    if (arch.kind == ArchKind::kMlp) {
      AffineForward(w, layers[0], x, hidden_pre);
      for (size_t h = 0; h < hidden.size(); ++h) {
        hidden[h] = hidden_pre[h] > 0.0 ? hidden_pre[h] : 0.0;
      }
      out_input = hidden;
    }
    AffineForward(w, out_layer, out_input, logits);
    const double lse = StableSoftmax(logits, probs);
    const int y = labels[r];
    total += lse - logits[y];

    // dL/dlogits = p - onehot(y).
    probs[y] -= 1.0;
    double* gw = grad.data() + out_layer.offset;
    double* gb = gw + out_layer.in * out_layer.out;
    for (size_t o = 0; o < out_layer.out; ++o) {
      const double d = probs[o];
      double* row = gw + o * out_layer.in;
      for (size_t i = 0; i < out_layer.in; ++i) row[i] += d * out_input[i];
      gb[o] += d;
    }
    if (arch.kind == ArchKind::kMlp) {
      const double* w2 = w.data() + out_layer.offset;
      std::fill(hidden_grad.begin(), hidden_grad.end(), 0.0);
      for (size_t o = 0; o < out_layer.out; ++o) {
        const double d = probs[o];
        const double* row = w2 + o * out_layer.in;
        for (size_t h = 0; h < out_layer.in; ++h) hidden_grad[h] += d * row[h];
      }
      const LayerShape& in_layer = layers[0];
      double* gw1 = grad.data() + in_layer.offset;
      double* gb1 = gw1 + in_layer.in * in_layer.out;
      for (size_t h = 0; h < in_layer.out; ++h) {
        if (hidden_pre[h] <= 0.0) continue;
        const double d = hidden_grad[h];
        double* row = gw1 + h * in_layer.in;
        for (size_t i = 0; i < in_layer.in; ++i) row[i] += d * x[i];
        gb1[h] += d;
      }
    }
  }
  return total;
}

void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t GetU32(std::string_view in, size_t pos) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<uint8_t>(in[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

Matrix::Matrix(size_t rows, size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  data_.resize(rows * cols);
}

Matrix Matrix::SelectRows(std::span<const size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(data_.begin() + indices[i] * cols_, cols_,
                out.data_.begin() + i * cols_);
  }
  return out;
}

size_t Architecture::ParameterCount() const {
  size_t count = 0;
  for (const LayerShape& l : Layers(*this)) count += l.out * (l.in + 1);
  return count;
}

std::string Architecture::DebugString() const {
  if (kind == ArchKind::kLinear) {
    return absl::StrFormat("Linear(%d, %d)", d_in, d_out);
  }
  return absl::StrFormat("MLP(%d, %d, %d)", d_in, d_hidden, d_out);
}

absl::StatusOr<ModelParams> ModelParams::Create(Architecture arch,
                                                std::vector<double> weights) {
  if (arch.d_in == 0 || arch.d_out == 0 ||
      (arch.kind == ArchKind::kMlp && arch.d_hidden == 0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("degenerate architecture %s", arch.DebugString()));
  }
  if (weights.size() != arch.ParameterCount()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%s expects %d weights, got %d", arch.DebugString(),
        arch.ParameterCount(), weights.size()));
  }
  for (size_t i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i])) {
      return absl::InvalidArgumentError(
          absl::StrFormat("weight %d is not finite", i));
    }
  }
  return ModelParams(arch, std::move(weights));
}

ModelParams ModelParams::Zeros(Architecture arch) {
  return ModelParams(arch, std::vector<double>(arch.ParameterCount(), 0.0));
}

ModelParams ModelParams::RandomInit(Architecture arch, CounterRng rng) {
  std::vector<double> w(arch.ParameterCount());
  for (const LayerShape& l : Layers(arch)) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    const size_t end = l.offset + l.out * (l.in + 1);
    for (size_t i = l.offset; i < end; ++i) {
      w[i] = (2.0 * rng.Uniform() - 1.0) * bound;
    }
  }
  return ModelParams(arch, std::move(w));
}

Batch Batch::SelectRows(std::span<const size_t> indices) const {
  Batch out;
  out.features = features.SelectRows(indices);
  out.labels.reserve(indices.size());
  for (size_t i : indices) out.labels.push_back(labels[i]);
  return out;
}

absl::Status ValidateBatch(const Batch& batch, const Architecture& arch) {
  if (batch.size() == 0) return absl::InvalidArgumentError("empty batch");
  if (batch.features.rows() != batch.labels.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "batch has %d feature rows but %d labels", batch.features.rows(),
        batch.labels.size()));
  }
  if (batch.features.cols() != arch.d_in) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "feature width %d does not match %s", batch.features.cols(),
        arch.DebugString()));
  }
  for (size_t i = 0; i < batch.labels.size(); ++i) {
    const int y = batch.labels[i];
    if (y < 0 || y >= static_cast<int>(arch.d_out)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("label %d at row %d outside [0, %d)", y, i, arch.d_out));
    }
  }
  for (double v : batch.features.data()) {
    if (!std::isfinite(v)) {
      return absl::InvalidArgumentError("non-finite feature value");
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<Matrix> Forward(const ModelParams& model,
                               const Matrix& features) {
  const Architecture& arch = model.arch();
  if (features.cols() != arch.d_in) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "feature width %d does not match %s", features.cols(),
        arch.DebugString()));
  }
  const auto layers = Layers(arch);
  Matrix out(features.rows(), arch.d_out);
  std::vector<double> hidden(arch.d_hidden);
  std::vector<double> logits(arch.d_out);
  for (size_t r = 0; r < features.rows(); ++r) {
    std::span<const double> input = features.Row(r);
    if (arch.kind == ArchKind::kMlp) {
      AffineForward(model.weights(), layers[0], input, hidden);
      for (double& h : hidden) h = h > 0.0 ? h : 0.0;
      input = hidden;
    }
    AffineForward(model.weights(), layers.back(), input, logits);
    StableSoftmax(logits, out.Row(r));
  }
  return out;
}

absl::StatusOr<LossAndGradient> LossAndGrad(const ModelParams& model,
                                            const Batch& batch) {
  FEDRASH_RETURN_IF_ERROR(ValidateBatch(batch, model.arch()));
  std::vector<size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), size_t{0});
  LossAndGradient result;
  result.grad.assign(model.weights().size(), 0.0);
  const double n = static_cast<double>(batch.size());
  result.loss =
      AccumulateGradient(model.arch(), model.weights(), batch.features,
                         batch.labels, rows, result.grad) /
      n;
  for (double& g : result.grad) g /= n;
  return result;
}

absl::StatusOr<ModelParams> SgdEpochs(const ModelParams& model,
                                      const Batch& train,
                                      const SgdOptions& options,
                                      uint64_t rng_seed) {
  if (!(options.lr > 0.0)) return absl::InvalidArgumentError("lr must be > 0");
  if (options.epochs < 0) return absl::InvalidArgumentError("epochs must be >= 0");
  if (options.batch_size < 1) {
    return absl::InvalidArgumentError("batch_size must be >= 1");
  }
  if (options.momentum < 0.0 || options.momentum >= 1.0) {
    return absl::InvalidArgumentError("momentum must be in [0, 1)");
  }
  FEDRASH_RETURN_IF_ERROR(ValidateBatch(train, model.arch()));
  if (options.epochs == 0) return model;

  const size_t n = train.size();
  const size_t batch_size = static_cast<size_t>(options.batch_size);
  std::vector<double> w(model.weights().begin(), model.weights().end());
  std::vector<double> velocity(w.size(), 0.0);
  std::vector<double> grad(w.size());
  std::vector<size_t> order(n);
  const CounterRng shuffle_root = CounterRng(rng_seed).Split(RngStream::kBatchShuffle);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    if (batch_size < n) {
      CounterRng rng = shuffle_root.Split(static_cast<uint64_t>(epoch));
      rng.Shuffle(std::span<size_t>(order));
    }
    for (size_t start = 0; start < n; start += batch_size) {
      const size_t end = std::min(n, start + batch_size);
      std::span<const size_t> rows(order.data() + start, end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      AccumulateGradient(model.arch(), w, train.features, train.labels, rows,
                         grad);
      const double m = static_cast<double>(rows.size());
      for (size_t j = 0; j < w.size(); ++j) {
        velocity[j] = options.momentum * velocity[j] + grad[j] / m;
        w[j] -= options.lr * velocity[j];
      }
    }
  }
  return ModelParams::Create(model.arch(), std::move(w));
}

std::string SerializeModel(const ModelParams& model) {
  const Architecture& arch = model.arch();
  std::string out;
  out.push_back(static_cast<char>(arch.kind));
  PutU32(out, arch.d_in);
  if (arch.kind == ArchKind::kMlp) PutU32(out, arch.d_hidden);
  PutU32(out, arch.d_out);
  for (double v : model.weights()) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  return out;
}

absl::StatusOr<ModelParams> ParseModel(std::string_view bytes) {
  if (bytes.empty()) return absl::DataLossError("empty model record");
  const auto tag = static_cast<uint8_t>(bytes[0]);
  if (tag > static_cast<uint8_t>(ArchKind::kMlp)) {
    return absl::DataLossError(absl::StrFormat("unknown arch tag %d", tag));
  }
  Architecture arch;
  arch.kind = static_cast<ArchKind>(tag);
  const size_t n_dims = arch.kind == ArchKind::kMlp ? 3 : 2;
  const size_t header = 1 + 4 * n_dims;
  if (bytes.size() < header) return absl::DataLossError("truncated model header");
  arch.d_in = GetU32(bytes, 1);
  if (arch.kind == ArchKind::kMlp) {
    arch.d_hidden = GetU32(bytes, 5);
    arch.d_out = GetU32(bytes, 9);
  } else {
    arch.d_out = GetU32(bytes, 5);
  }
  const size_t expected = header + 8 * arch.ParameterCount();
  if (bytes.size() != expected) {
    return absl::DataLossError(absl::StrFormat(
        "model record for %s should be %d bytes, got %d", arch.DebugString(),
        expected, bytes.size()));
  }
  std::vector<double> w(arch.ParameterCount());
  for (size_t j = 0; j < w.size(); ++j) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[header + 8 * j + i]))
              << (8 * i);
    }
    w[j] = std::bit_cast<double>(bits);
  }
  return ModelParams::Create(arch, std::move(w));
}

}  // namespace fedrash
