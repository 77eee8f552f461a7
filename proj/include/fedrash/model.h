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

#ifndef FEDRASH_MODEL_H_
#define FEDRASH_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "fedrash/rng.h"

namespace fedrash {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  Matrix(size_t rows, size_t cols, std::vector<double> data);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> Row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> Row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  const std::vector<double>& data() const { return data_; }

  // Returns the rows at `indices`, in that order.
  Matrix SelectRows(std::span<const size_t> indices) const;

  bool operator==(const Matrix&) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

enum class ArchKind : uint8_t { kLinear = 0, kMlp = 1 };

struct Architecture {
  ArchKind kind = ArchKind::kLinear;
  uint32_t d_in = 0;
  uint32_t d_hidden = 0;  // Only meaningful for kMlp.
  uint32_t d_out = 0;

  static Architecture Linear(uint32_t d_in, uint32_t d_out) {
    return {ArchKind::kLinear, d_in, 0, d_out};
  }
  static Architecture Mlp(uint32_t d_in, uint32_t d_hidden, uint32_t d_out) {
    return {ArchKind::kMlp, d_in, d_hidden, d_out};
  }

  size_t ParameterCount() const;
  std::string DebugString() const;
  bool operator==(const Architecture&) const = default;
};

// Model weights laid out as row-major layer blocks with each layer's biases
// appended after its weight matrix:
//   Linear: W (d_out x d_in), b (d_out)
//   MLP:    W1 (d_hidden x d_in), b1 (d_hidden), W2 (d_out x d_hidden), b2
// Values are immutable; training returns new instances.
class ModelParams {
 public:
  static absl::StatusOr<ModelParams> Create(Architecture arch,
                                            std::vector<double> weights);
  static ModelParams Zeros(Architecture arch);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, biases included.
  static ModelParams RandomInit(Architecture arch, CounterRng rng);

  const Architecture& arch() const { return arch_; }
  std::span<const double> weights() const { return weights_; }

  bool operator==(const ModelParams&) const = default;

 private:
  ModelParams(Architecture arch, std::vector<double> weights)
      : arch_(arch), weights_(std::move(weights)) {}

  Architecture arch_;
  std::vector<double> weights_;
};

struct Batch {
  Matrix features;
  std::vector<int> labels;

  size_t size() const { return labels.size(); }
  Batch SelectRows(std::span<const size_t> indices) const;
};

// Checks that `batch` is nonempty, finite and compatible with `arch`.
absl::Status ValidateBatch(const Batch& batch, const Architecture& arch);

// Class probabilities (softmax of the logits), one row per input row.
absl::StatusOr<Matrix> Forward(const ModelParams& model, const Matrix& features);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean cross-entropy over the batch and its gradient w.r.t. the weights.
absl::StatusOr<LossAndGradient> LossAndGrad(const ModelParams& model,
                                            const Batch& batch);

struct SgdOptions {
  double lr = 0.1;
  int epochs = 1;
  int batch_size = 32;
  double momentum = 0.0;
};

// Mini-batch SGD. Each epoch visits the rows in an order drawn from the
// kBatchShuffle stream of `rng_seed`; when batch_size covers the whole set the
// rows are used in their stored order and each epoch is one full-batch step.
absl::StatusOr<ModelParams> SgdEpochs(const ModelParams& model,
                                      const Batch& train,
                                      const SgdOptions& options,
                                      uint64_t rng_seed);

// Binary record: arch tag (1 byte), dims as 4-byte little-endian unsigned
// (d_in, d_out for Linear; d_in, d_hidden, d_out for MLP), then weights as
// 8-byte little-endian IEEE-754 doubles.
std::string SerializeModel(const ModelParams& model);
absl::StatusOr<ModelParams> ParseModel(std::string_view bytes);

}  // namespace fedrash

#endif  // FEDRASH_MODEL_H_
