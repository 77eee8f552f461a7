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

#ifndef FEDRASH_RNG_H_
#define FEDRASH_RNG_H_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fedrash {

// Stream identifiers used with CounterRng::Split. Every consumer of
// randomness derives its own stream so that adding draws in one place never
// shifts the sequence seen by another.
enum class RngStream : uint64_t {
  kModelInit = 1,
  kBatchShuffle = 2,
  kClientSelection = 3,
  kPartition = 4,
  kSynthetic = 5,
  kDpNoise = 6,
  kFairnessSample = 7,
  kIndividualClients = 8,
};

// Counter-based 64-bit generator.
//
// The i-th output of a generator with key k is SplitMix64(k + (i + 1) * phi),
// where phi is the 64-bit golden-ratio increment and SplitMix64 is the
// finalizer from Steele, Lea and Flood (2014). Child streams are obtained by
// hashing (key, stream id) into a fresh key. All transforms to floating point
// and to other distributions are implemented here rather than through
// <random> distributions, whose algorithms differ between standard library
// implementations, so sequences are identical on every platform.
class CounterRng {
 public:
  explicit CounterRng(uint64_t seed);

  CounterRng Split(uint64_t stream) const;
  CounterRng Split(RngStream stream) const {
    return Split(static_cast<uint64_t>(stream));
  }

  uint64_t Next();
  uint64_t key() const { return key_; }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform();
  // Uniform on (0, 1).
  double UniformOpen();
  // Uniform integer in [0, n). Requires n > 0.
  uint64_t UniformInt(uint64_t n);
  double Normal();
  // Gamma(shape, 1) via Marsaglia-Tsang, with the shape < 1 boost.
  double Gamma(double shape);
  // Symmetric Dirichlet(alpha) over `k` components.
  std::vector<double> Dirichlet(double alpha, int k);

  // Fisher-Yates shuffle.
  template <typename T>
  void Shuffle(std::span<T> values) {
    for (size_t i = values.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(UniformInt(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

// SplitMix64 finalizer; exposed for seed derivation.
uint64_t MixBits(uint64_t x);

// Combines several integers into one seed.
uint64_t DeriveSeed(std::initializer_list<uint64_t> parts);

}  // namespace fedrash

#endif  // FEDRASH_RNG_H_
