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

#include "fedrash/rng.h"

#include <cmath>
#include <initializer_list>
#include <numbers>

namespace fedrash {
namespace {

constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

uint64_t MixBits(uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

uint64_t DeriveSeed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x6a09e667f3bcc909ULL;
  for (uint64_t p : parts) h = MixBits(h ^ MixBits(p + kGolden));
  return h;
}

CounterRng::CounterRng(uint64_t seed) : key_(MixBits(seed + kGolden)) {}

CounterRng CounterRng::Split(uint64_t stream) const {
  CounterRng child(0);
  child.key_ = MixBits(key_ ^ MixBits(stream * kGolden + 0x5851f42d4c957f2dULL));
  return child;
}

uint64_t CounterRng::Next() {
  ++counter_;
  return MixBits(key_ + counter_ * kGolden);
}

double CounterRng::Uniform() {
  return static_cast<double>(Next() >> 11) * 0x1.0p-53;
}

double CounterRng::UniformOpen() {
  return (static_cast<double>(Next() >> 11) + 0.5) * 0x1.0p-53;
}

uint64_t CounterRng::UniformInt(uint64_t n) {
  // Rejection sampling on the top of the range keeps the result unbiased.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = Next();
  while (x >= limit) x = Next();
  return x % n;
}

double CounterRng::Normal() {
  const double u1 = UniformOpen();
  const double u2 = Uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double CounterRng::Gamma(double shape) {
  if (shape < 1.0) {
    const double g = Gamma(shape + 1.0);
    return g * std::pow(UniformOpen(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x;
    double v;
    do {
      x = Normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = UniformOpen();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> CounterRng::Dirichlet(double alpha, int k) {
  std::vector<double> out(k);
  while (true) {
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
      out[i] = Gamma(alpha);
      total += out[i];
    }
    // Very small alpha can underflow every component; draw again.
    if (total > 0.0 && std::isfinite(total)) {
      for (double& v : out) v /= total;
      return out;
    }
  }
}

}  // namespace fedrash
