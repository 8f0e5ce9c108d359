// Copyright 2026 the sparsekit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sparsekit/errors.hpp"

namespace sparsekit {

/// Caller-owned random state for query-time sampling.
using RngState = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the i-th child of a master seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x5851f42d4c957f2dULL));
}

/// Counter-based generator: output k is a hash of (seed, k), so streams are
/// reproducible and cheap to fork.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept : seed_(splitmix64(seed)) {}

  std::uint64_t next_u64() noexcept {
    return splitmix64(seed_ ^ splitmix64(counter_++));
  }

  /// Uniform in (0, 1).
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller.
  double gaussian() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  int sign() noexcept { return (next_u64() >> 63) != 0 ? 1 : -1; }

  /// Uniform in [0, n) by rejection, platform independent.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw PreconditionViolation("empty sampling range");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Uniform in [0, n) from a caller-owned engine, platform independent.
inline std::uint64_t uniform_index(RngState &rng, std::uint64_t n) {
  if (n == 0) throw PreconditionViolation("empty sampling range");
  const std::uint64_t limit = RngState::max() - (RngState::max() % n);
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

/// count distinct values from [0, n), uniformly without replacement.
inline std::vector<std::size_t> sample_without_replacement(RngState &rng,
                                                           std::size_t n,
                                                           std::size_t count) {
  if (count < 1 || count > n) {
    throw PreconditionViolation("sample size " + std::to_string(count) +
                                " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace sparsekit
