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

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/random.hpp"

namespace sparsekit {

/// Polynomial hash of the given degree + 1 over the field of the Mersenne
/// prime 2^61 - 1; the family is (degree + 1)-wise independent.
class KWiseHash {
 public:
  static constexpr std::uint64_t kPrime = (std::uint64_t{1} << 61) - 1;

  KWiseHash(std::uint64_t seed, std::size_t independence)
      : seed_(seed), coefficients_(std::max<std::size_t>(independence, 2)) {
    CounterRng rng(seed);
    for (auto &c : coefficients_) c = rng.next_u64() % kPrime;
  }

  std::uint64_t operator()(std::uint64_t key) const noexcept {
    const std::uint64_t x = key % kPrime;
    std::uint64_t acc = 0;
    for (auto it = coefficients_.rbegin(); it != coefficients_.rend(); ++it) {
      acc = add(mul(acc, x), *it);
    }
    return acc;
  }

  std::size_t independence() const noexcept { return coefficients_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  static std::uint64_t reduce(unsigned __int128 x) noexcept {
    std::uint64_t r = static_cast<std::uint64_t>(x & kPrime) +
                      static_cast<std::uint64_t>(x >> 61);
    r = (r & kPrime) + (r >> 61);
    return r >= kPrime ? r - kPrime : r;
  }
  static std::uint64_t mul(std::uint64_t a, std::uint64_t b) noexcept {
    return reduce(static_cast<unsigned __int128>(a) * b);
  }
  static std::uint64_t add(std::uint64_t a, std::uint64_t b) noexcept {
    const std::uint64_t s = a + b;
    return s >= kPrime ? s - kPrime : s;
  }

  std::uint64_t seed_;
  std::vector<std::uint64_t> coefficients_;
};

/// In-place unnormalized Walsh-Hadamard transform; size must be a power of two.
inline void fwht(std::span<double> data) {
  const std::size_t n = data.size();
  for (std::size_t half = 1; half < n; half *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * half) {
      for (std::size_t j = i; j < i + half; ++j) {
        const double a = data[j];
        const double b = data[j + half];
        data[j] = a + b;
        data[j + half] = a - b;
      }
    }
  }
}

/// Entry (row, col) of the unnormalized Hadamard matrix.
inline constexpr double hadamard_entry(std::size_t row, std::size_t col) noexcept {
  return (std::popcount(row & col) % 2 == 0) ? 1.0 : -1.0;
}

/// Circular convolution of two equal-length sequences.
inline std::vector<double> circular_convolution(std::span<const double> a,
                                                std::span<const double> b,
                                                bool use_fft) {
  const std::size_t n = a.size();
  std::vector<double> out(n, 0.0);
  if (!use_fft) {
    for (std::size_t i = 0; i < n; ++i) {
      if (a[i] == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t r = i + j >= n ? i + j - n : i + j;
        out[r] += a[i] * b[j];
      }
    }
    return out;
  }
  Eigen::FFT<double> fft;
  std::vector<double> av(a.begin(), a.end()), bv(b.begin(), b.end());
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, av);
  fft.fwd(fb, bv);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.inv(out, fa);
  out.resize(n);
  return out;
}

inline constexpr std::size_t next_power_of_two(std::size_t n) noexcept {
  return n <= 1 ? 1 : std::bit_ceil(n);
}

/// Degree-two TensorSRHT: S = P (H D1 x H D2) / sqrt(b) with the +-1 Hadamard
/// matrix H and Rademacher diagonals D1, D2. Inputs of side d are zero-padded
/// to a power of two.
class TensorSrhtSketch {
 public:
  TensorSrhtSketch(std::size_t dim, std::size_t rows, std::uint64_t seed)
      : dim_(dim), padded_(next_power_of_two(dim)), rows_(rows), seed_(seed) {
    if (dim == 0 || rows == 0) throw ConfigError("sketch needs d >= 1 and b >= 1");
    CounterRng rng(seed);
    sign1_.resize(padded_);
    sign2_.resize(padded_);
    for (auto &s : sign1_) s = rng.sign();
    for (auto &s : sign2_) s = rng.sign();
    samples_.resize(rows_);
    for (auto &[i, j] : samples_) {
      i = static_cast<std::size_t>(rng.below(padded_));
      j = static_cast<std::size_t>(rng.below(padded_));
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t padded_dim() const noexcept { return padded_; }
  std::size_t rows() const noexcept { return rows_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::span<const int> sign1() const noexcept { return sign1_; }
  std::span<const int> sign2() const noexcept { return sign2_; }
  std::span<const std::pair<std::size_t, std::size_t>> samples() const noexcept {
    return samples_;
  }

  /// S vec(u v^T) in O(d log d + b).
  Vector apply_pair(const Vector &u, const Vector &v) const {
    check_side(u);
    check_side(v);
    const std::vector<double> a = transform(u, sign1_);
    const std::vector<double> b = transform(v, sign2_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows_));
    Vector out(static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) {
      out[static_cast<Eigen::Index>(r)] = a[samples_[r].first] * b[samples_[r].second] * scale;
    }
    return out;
  }

  /// S x for x of length d^2, index i*d + j holding entry (i, j).
  Vector apply_flat(const Vector &x) const {
    if (static_cast<std::size_t>(x.size()) != dim_ * dim_) {
      throw DimensionMismatch("flat sketch input must have length d^2 = " +
                              std::to_string(dim_ * dim_));
    }
    // Y = H D1 X D2 H, then sample entries of Y.
    std::vector<double> y(padded_ * padded_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        y[i * padded_ + j] =
            sign1_[i] * sign2_[j] * x[static_cast<Eigen::Index>(i * dim_ + j)];
      }
    }
    for (std::size_t i = 0; i < padded_; ++i) {
      fwht(std::span<double>(y).subspan(i * padded_, padded_));
    }
    std::vector<double> column(padded_);
    for (std::size_t j = 0; j < padded_; ++j) {
      for (std::size_t i = 0; i < padded_; ++i) column[i] = y[i * padded_ + j];
      fwht(column);
      for (std::size_t i = 0; i < padded_; ++i) y[i * padded_ + j] = column[i];
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows_));
    Vector out(static_cast<Eigen::Index>(rows_));
    for (std::size_t r = 0; r < rows_; ++r) {
      out[static_cast<Eigen::Index>(r)] =
          y[samples_[r].first * padded_ + samples_[r].second] * scale;
    }
    return out;
  }

  nlohmann::json descriptor() const {
    return {{"kind", "tensor_srht"}, {"dim", dim_}, {"rows", rows_}, {"seed", seed_}};
  }

 private:
  void check_side(const Vector &u) const {
    if (static_cast<std::size_t>(u.size()) != dim_) {
      throw DimensionMismatch("sketch factor must have length " + std::to_string(dim_));
    }
  }

  std::vector<double> transform(const Vector &u, const std::vector<int> &signs) const {
    std::vector<double> a(padded_, 0.0);
    for (std::size_t i = 0; i < dim_; ++i) a[i] = signs[i] * u[static_cast<Eigen::Index>(i)];
    fwht(a);
    return a;
  }

  std::size_t dim_;
  std::size_t padded_;
  std::size_t rows_;
  std::uint64_t seed_;
  std::vector<int> sign1_;
  std::vector<int> sign2_;
  std::vector<std::pair<std::size_t, std::size_t>> samples_;
};

/// Degree-two tensor sparse embedding: s blocks of b/s rows; column (i, j) has
/// entry sigma1(i,k) sigma2(j,k) / sqrt(s) in block k at offset
/// (h1(i,k) + h2(j,k)) mod b/s.
class TensorSparseSketch {
 public:
  static constexpr std::size_t kDirectConvolutionLimit = 64;

  TensorSparseSketch(std::size_t dim, std::size_t rows, std::size_t sparsity,
                     std::uint64_t seed, std::size_t independence = 8)
      : dim_(dim), rows_(rows), sparsity_(sparsity), seed_(seed),
        h1_(derive_seed(seed, 0), independence),
        s1_(derive_seed(seed, 1), independence),
        h2_(derive_seed(seed, 2), independence),
        s2_(derive_seed(seed, 3), independence) {
    if (dim == 0 || rows == 0 || sparsity == 0) {
      throw ConfigError("sparse sketch needs d, b, s >= 1");
    }
    if (rows % sparsity != 0) {
      throw ConfigError("b = " + std::to_string(rows) +
                        " is not divisible by s = " + std::to_string(sparsity));
    }
    buckets_ = rows / sparsity;
    const std::size_t cells = dim_ * sparsity_;
    bucket1_.resize(cells);
    bucket2_.resize(cells);
    sign1_.resize(cells);
    sign2_.resize(cells);
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t k = 0; k < sparsity_; ++k) {
        const std::size_t c = i * sparsity_ + k;
        bucket1_[c] = bucket_hash(h1_, i, k);
        bucket2_[c] = bucket_hash(h2_, i, k);
        sign1_[c] = sign_hash(s1_, i, k);
        sign2_[c] = sign_hash(s2_, i, k);
      }
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t sparsity() const noexcept { return sparsity_; }
  std::size_t block_rows() const noexcept { return buckets_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t independence() const noexcept { return h1_.independence(); }

  /// Hash values straight from the polynomial families (side 1 or 2).
  std::size_t bucket(int side, std::size_t i, std::size_t k) const {
    return bucket_hash(side == 1 ? h1_ : h2_, i, k);
  }
  int sign(int side, std::size_t i, std::size_t k) const {
    return sign_hash(side == 1 ? s1_ : s2_, i, k);
  }

  /// R vec(u v^T) by one circular convolution per block.
  Vector apply_pair(const Vector &u, const Vector &v,
                    bool force_fft = false) const {
    check_side(u);
    check_side(v);
    const bool use_fft = force_fft || buckets_ > kDirectConvolutionLimit;
    const double scale = 1.0 / std::sqrt(static_cast<double>(sparsity_));
    Vector out = Vector::Zero(static_cast<Eigen::Index>(rows_));
    std::vector<double> cu(buckets_), cv(buckets_);
    for (std::size_t k = 0; k < sparsity_; ++k) {
      std::fill(cu.begin(), cu.end(), 0.0);
      std::fill(cv.begin(), cv.end(), 0.0);
      bool any_u = false, any_v = false;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double ui = u[static_cast<Eigen::Index>(i)];
        const double vi = v[static_cast<Eigen::Index>(i)];
        const std::size_t c = i * sparsity_ + k;
        if (ui != 0.0) {
          cu[bucket1_[c]] += sign1_[c] * ui;
          any_u = true;
        }
        if (vi != 0.0) {
          cv[bucket2_[c]] += sign2_[c] * vi;
          any_v = true;
        }
      }
      if (!any_u || !any_v) continue;
      const std::vector<double> conv = circular_convolution(cu, cv, use_fft);
      for (std::size_t r = 0; r < buckets_; ++r) {
        out[static_cast<Eigen::Index>(k * buckets_ + r)] = conv[r] * scale;
      }
    }
    return out;
  }

  /// R x for x of length d^2 in O(nnz(x) s).
  Vector apply_flat(const Vector &x) const {
    if (static_cast<std::size_t>(x.size()) != dim_ * dim_) {
      throw DimensionMismatch("flat sketch input must have length d^2 = " +
                              std::to_string(dim_ * dim_));
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(sparsity_));
    Vector out = Vector::Zero(static_cast<Eigen::Index>(rows_));
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) {
        const double value = x[static_cast<Eigen::Index>(i * dim_ + j)];
        if (value == 0.0) continue;
        for (std::size_t k = 0; k < sparsity_; ++k) {
          const std::size_t ci = i * sparsity_ + k;
          const std::size_t cj = j * sparsity_ + k;
          std::size_t r = bucket1_[ci] + bucket2_[cj];
          if (r >= buckets_) r -= buckets_;
          out[static_cast<Eigen::Index>(k * buckets_ + r)] +=
              sign1_[ci] * sign2_[cj] * value * scale;
        }
      }
    }
    return out;
  }

  nlohmann::json descriptor() const {
    return {{"kind", "tensor_sparse"}, {"dim", dim_},     {"rows", rows_},
            {"sparsity", sparsity_},   {"seed", seed_},   {"independence", independence()}};
  }

 private:
  std::size_t bucket_hash(const KWiseHash &h, std::size_t i, std::size_t k) const {
    return static_cast<std::size_t>(h(i * sparsity_ + k) % buckets_);
  }
  int sign_hash(const KWiseHash &h, std::size_t i, std::size_t k) const {
    return (h(i * sparsity_ + k) & 1) != 0 ? 1 : -1;
  }

  void check_side(const Vector &u) const {
    if (static_cast<std::size_t>(u.size()) != dim_) {
      throw DimensionMismatch("sketch factor must have length " + std::to_string(dim_));
    }
  }

  std::size_t dim_;
  std::size_t rows_;
  std::size_t sparsity_;
  std::uint64_t seed_;
  std::size_t buckets_ = 0;
  KWiseHash h1_, s1_, h2_, s2_;
  std::vector<std::size_t> bucket1_, bucket2_;
  std::vector<int> sign1_, sign2_;
};

enum class SketchKind { kSrht, kSparse };

enum class Profile { kFull, kDesk };

inline std::string to_string(SketchKind kind) {
  return kind == SketchKind::kSrht ? "tensor_srht" : "tensor_sparse";
}

inline std::string to_string(Profile profile) {
  return profile == Profile::kFull ? "full" : "desk";
}

struct SketchParams {
  SketchKind kind = SketchKind::kSrht;
  std::size_t dim = 1;
  std::size_t rows = 1;
  std::size_t sparsity = 1;
  std::size_t independence = 8;
};

/// Default sizes: b = ceil(4 eps^-2 log(m/delta)) rounded up to a multiple of
/// s = ceil(eps b), and k = ceil((d + log(1/delta)) log(m d)).
struct SketchDefaults {
  std::size_t rows;
  std::size_t sparsity;
  std::size_t ensemble_size;

  static SketchDefaults make(double epsilon, std::size_t points, std::size_t dim,
                             double delta, Profile profile = Profile::kFull) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("need 0 < epsilon < 1");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("need 0 < delta < 1");
    const double m = static_cast<double>(std::max<std::size_t>(points, 1));
    const double d = static_cast<double>(std::max<std::size_t>(dim, 1));
    const auto raw = static_cast<std::size_t>(
        std::ceil(4.0 / (epsilon * epsilon) * std::log(std::max(m / delta, 2.0))));
    const auto s = static_cast<std::size_t>(std::ceil(epsilon * static_cast<double>(raw)));
    const std::size_t b = (raw + s - 1) / s * s;
    double k = std::ceil((d + std::log(1.0 / delta)) * std::log(std::max(m * d, 2.0)));
    if (profile == Profile::kDesk) k = std::ceil(k / 10.0);
    return {b, s, static_cast<std::size_t>(std::max(k, 1.0))};
  }
};

/// Theoretical additive floor (m d)^-9 of the robust ensemble.
inline double theoretical_additive_floor(std::size_t points, std::size_t dim) {
  return std::pow(static_cast<double>(std::max<std::size_t>(points * dim, 2)), -9.0);
}

/// k independently seeded sketches of one kind.
class SketchEnsemble {
 public:
  using Sketch = std::variant<TensorSrhtSketch, TensorSparseSketch>;

  SketchEnsemble(SketchParams params, std::size_t count, std::uint64_t master_seed,
                 double epsilon = 0.0, double delta = 0.0, double additive_floor = 0.0)
      : params_(params), master_seed_(master_seed), epsilon_(epsilon), delta_(delta),
        additive_floor_(additive_floor) {
    if (count < 1) throw ConfigError("ensemble needs k >= 1");
    sketches_.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint64_t seed = derive_seed(master_seed, i);
      if (params.kind == SketchKind::kSrht) {
        sketches_.emplace_back(TensorSrhtSketch(params.dim, params.rows, seed));
      } else {
        sketches_.emplace_back(TensorSparseSketch(params.dim, params.rows,
                                                  params.sparsity, seed,
                                                  params.independence));
      }
    }
  }

  std::size_t size() const noexcept { return sketches_.size(); }
  const SketchParams &params() const noexcept { return params_; }
  std::size_t rows() const noexcept { return params_.rows; }
  std::uint64_t master_seed() const noexcept { return master_seed_; }
  double additive_floor() const noexcept { return additive_floor_; }
  const Sketch &sketch(std::size_t i) const { return sketches_.at(i); }

  std::uint64_t seed(std::size_t i) const {
    return std::visit([](const auto &s) { return s.seed(); }, sketches_.at(i));
  }

  Vector apply_pair(std::size_t i, const Vector &u, const Vector &v) const {
    return std::visit([&](const auto &s) { return s.apply_pair(u, v); }, sketches_.at(i));
  }

  Vector apply_flat(std::size_t i, const Vector &x) const {
    return std::visit([&](const auto &s) { return s.apply_flat(x); }, sketches_.at(i));
  }

  /// count distinct sketch indices, uniformly without replacement.
  std::vector<std::size_t> sample(std::size_t count, RngState &rng) const {
    if (count > size()) {
      throw PreconditionViolation("cannot sample " + std::to_string(count) +
                                  " of " + std::to_string(size()) + " sketches");
    }
    return sample_without_replacement(rng, size(), count);
  }

  nlohmann::json descriptor() const {
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t i = 0; i < size(); ++i) seeds.push_back(seed(i));
    return {{"kind", to_string(params_.kind)},
            {"dim", params_.dim},
            {"rows", params_.rows},
            {"sparsity", params_.sparsity},
            {"independence", params_.independence},
            {"count", size()},
            {"master_seed", master_seed_},
            {"epsilon", epsilon_},
            {"delta", delta_},
            {"additive_floor", additive_floor_},
            {"seeds", seeds}};
  }

  /// Rebuilds an ensemble from its descriptor.
  static SketchEnsemble from_descriptor(const nlohmann::json &j) {
    SketchParams p;
    p.kind = j.at("kind").get<std::string>() == "tensor_srht" ? SketchKind::kSrht
                                                              : SketchKind::kSparse;
    p.dim = j.at("dim").get<std::size_t>();
    p.rows = j.at("rows").get<std::size_t>();
    p.sparsity = j.at("sparsity").get<std::size_t>();
    p.independence = j.at("independence").get<std::size_t>();
    return SketchEnsemble(p, j.at("count").get<std::size_t>(),
                          j.at("master_seed").get<std::uint64_t>(),
                          j.at("epsilon").get<double>(), j.at("delta").get<double>(),
                          j.at("additive_floor").get<double>());
  }

 private:
  SketchParams params_;
  std::uint64_t master_seed_;
  double epsilon_;
  double delta_;
  double additive_floor_;
  std::vector<Sketch> sketches_;
};

inline std::vector<std::size_t> ensemble_sample(const SketchEnsemble &ensemble,
                                                std::size_t count, RngState &rng) {
  return ensemble.sample(count, rng);
}

}  // namespace sparsekit
