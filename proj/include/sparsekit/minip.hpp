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
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsekit/afn.hpp"
#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/random.hpp"
#include "sparsekit/sketch.hpp"

namespace sparsekit {

/// Squared AFN factor cbar^2 = c(1 - tau)(1 - eps)^2 / (4(c - tau)).
inline double minip_approximation_squared(double c, double tau, double epsilon) {
  if (c == tau) throw ConfigError("c must differ from tau");
  return c * (1.0 - tau) * (1.0 - epsilon) * (1.0 - epsilon) / (4.0 * (c - tau));
}

enum class MinIpRegime {
  kSqrtN,      // cbar^2 > 2, query time about n^{1/2}
  kSmallPower  // cbar^2 > 100, query time about n^{1/100}
};

inline std::string to_string(MinIpRegime r) {
  return r == MinIpRegime::kSqrtN ? "sqrt_n" : "small_power";
}

/// Upper end of the admissible c range for a target cbar^2 regime.
inline double minip_window_upper(double tau, double epsilon, MinIpRegime regime) {
  const double x = (1.0 - epsilon) * (1.0 - epsilon) * tau + 2.0 * epsilon;
  return regime == MinIpRegime::kSqrtN ? 8.0 * tau / (x + 7.0) : 400.0 * tau / (x + 399.0);
}

/// Validates (c, tau, eps) against both windows; the narrower window wins.
inline MinIpRegime check_minip_window(double c, double tau, double epsilon) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("need 0 < tau < 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("need 0 < epsilon < 1");
  if (!(c > tau)) throw ConfigError("violated c > tau");
  if (!(c < 1.0)) throw ConfigError("violated c < 1");
  if (c < minip_window_upper(tau, epsilon, MinIpRegime::kSmallPower)) {
    return MinIpRegime::kSmallPower;
  }
  if (c < minip_window_upper(tau, epsilon, MinIpRegime::kSqrtN)) return MinIpRegime::kSqrtN;
  throw ConfigError("violated c < 8 tau / ((1 - eps)^2 tau + 2 eps + 7) = " +
                    std::to_string(minip_window_upper(tau, epsilon, MinIpRegime::kSqrtN)));
}

/// phi(x) = (x / D, 0, sqrt(1 - |x|^2 / D^2)).
inline Vector transform_data_point(const Vector &x, double scale) {
  const double ratio = x.squaredNorm() / (scale * scale);
  if (ratio > 1.0 + 1e-12) {
    throw PreconditionViolation("point norm " + std::to_string(x.norm()) +
                                " exceeds the data scale " + std::to_string(scale));
  }
  Vector out(x.size() + 2);
  out.head(x.size()) = x / scale;
  out[x.size()] = 0.0;
  out[x.size() + 1] = std::sqrt(std::max(0.0, 1.0 - ratio));
  return out;
}

/// psi(y) = (y / D, sqrt(1 - |y|^2 / D^2), 0).
inline Vector transform_query_point(const Vector &y, double scale) {
  const double ratio = y.squaredNorm() / (scale * scale);
  if (ratio > 1.0 + 1e-12) {
    throw PreconditionViolation("query norm exceeds the query scale");
  }
  Vector out(y.size() + 2);
  out.head(y.size()) = y / scale;
  out[y.size()] = std::sqrt(std::max(0.0, 1.0 - ratio));
  out[y.size() + 1] = 0.0;
  return out;
}

struct MinIpTransform {
  std::vector<Vector> points;
  Vector query;
  double data_scale = 0.0;
  double query_scale = 0.0;
};

/// Maps a dataset and a query to unit vectors whose distances order the
/// inner products. The data scale defaults to the largest norm.
inline MinIpTransform minip_transform(std::span<const Vector> data, const Vector &query,
                                      std::optional<double> data_scale = std::nullopt) {
  if (data.empty()) throw PreconditionViolation("empty dataset");
  double dx = 0.0;
  for (const auto &x : data) {
    if (x.size() != query.size()) throw DimensionMismatch("data and query lengths differ");
    dx = std::max(dx, x.norm());
  }
  if (data_scale) {
    if (*data_scale < dx * (1.0 - 1e-12)) {
      throw PreconditionViolation("data scale below the largest norm");
    }
    dx = *data_scale;
  }
  if (dx == 0.0) dx = 1.0;
  const double dy = query.norm() > 0.0 ? query.norm() : 1.0;
  MinIpTransform t{{}, transform_query_point(query, dy), dx, dy};
  t.points.reserve(data.size());
  for (const auto &x : data) t.points.push_back(transform_data_point(x, dx));
  return t;
}

struct MinIpResult {
  std::size_t index = 0;
  double value = 0.0;
};

/// Exhaustive minimum inner product; ties to the smallest index.
inline MinIpResult exact_min_ip_oracle(std::span<const Vector> data, const Vector &q) {
  if (data.empty()) throw PreconditionViolation("empty dataset");
  MinIpResult best{0, data[0].dot(q)};
  for (std::size_t i = 1; i < data.size(); ++i) {
    const double v = data[i].dot(q);
    if (v < best.value) best = {i, v};
  }
  return best;
}

struct MinIpParams {
  double c = 0.52;
  double tau = 0.5;
  double epsilon = 0.05;
  double lambda = 0.01;  // quantization granularity
  double delta = 0.1;    // failure probability
  SketchKind kind = SketchKind::kSrht;
  std::size_t sketch_rows = 0;       // 0: SketchDefaults
  std::size_t sparsity = 0;          // 0: SketchDefaults (sparse kind only)
  std::size_t sketch_count = 0;      // 0: SketchDefaults
  std::size_t replicas = 0;          // kappa; 0: formula
  std::size_t sampled_sketches = 0;  // 0: ceil(ln b)
  double replica_constant = 1.0;
  AfnParams afn{};  // approximation is derived from (c, tau, eps)
  Profile profile = Profile::kFull;
};

struct MinIpAnswer {
  std::size_t id = 0;
  double inner_product = 0.0;  // exact, in the caller's scale
  double normalized = 0.0;     // inner_product / (D_X |x|)
  double estimate = 0.0;       // from the sketched distance, caller's scale
};

/// Robust approximate Min-IP index over plain vectors or tensor inputs
/// v v^T. Each of k sketches carries kappa AFN replicas over the sketched,
/// transformed points; a query samples a few sketches, quantizes the sketched
/// query and ranks every returned candidate by its exact inner product.
class RobustMinIpIndex {
 public:
  enum class InputKind { kFlat, kTensor };

  /// Plain vectors of any length n, zero-padded to side^2 with side = ceil(sqrt(n)).
  static RobustMinIpIndex over_vectors(std::span<const Vector> points, MinIpParams params,
                                       std::uint64_t seed,
                                       std::optional<double> data_scale = std::nullopt) {
    if (points.empty()) throw PreconditionViolation("Min-IP build needs n >= 1");
    const auto n = static_cast<std::size_t>(points[0].size());
    auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    while (side * side < n) ++side;
    RobustMinIpIndex index(InputKind::kFlat, n, side, params);
    std::map<std::size_t, Stored> stored;
    for (std::size_t i = 0; i < points.size(); ++i) stored.emplace(i, index.make_flat(points[i]));
    index.finish_build(std::move(stored), seed, data_scale);
    return index;
  }

  /// Tensor inputs: point i is vec(v_i v_i^T) and queries are side x side matrices.
  static RobustMinIpIndex over_outer_products(const VectorFamily &family,
                                              MinIpParams params, std::uint64_t seed,
                                              std::optional<double> data_scale = std::nullopt) {
    if (family.empty()) throw PreconditionViolation("Min-IP build needs n >= 1");
    RobustMinIpIndex index(InputKind::kTensor, family.dim() * family.dim(), family.dim(),
                           params);
    std::map<std::size_t, Stored> stored;
    for (std::size_t i = 0; i < family.size(); ++i) {
      stored.emplace(i, index.make_tensor(family[i]));
    }
    index.finish_build(std::move(stored), seed, data_scale);
    return index;
  }

  InputKind input_kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return stored_.size(); }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t side() const noexcept { return side_; }
  double data_scale() const noexcept { return data_scale_; }
  double approximation_squared() const noexcept { return cbar_sq_; }
  MinIpRegime regime() const noexcept { return regime_; }
  std::size_t replicas() const noexcept { return replicas_; }
  std::size_t sampled_sketches() const noexcept { return sampled_; }
  const SketchEnsemble &ensemble() const { return *ensemble_; }
  const MinIpParams &params() const noexcept { return params_; }
  bool contains(std::size_t id) const { return stored_.contains(id); }

  /// lambda~ = 2(1 + 1/cbar)(lambda + alpha).
  double additive_slack() const noexcept {
    return 2.0 * (1.0 + 1.0 / std::sqrt(cbar_sq_)) *
           (params_.lambda + ensemble_->additive_floor());
  }

  /// Acceptance threshold tau/c + lambda~ on the normalized inner product.
  double acceptance_threshold() const noexcept {
    return params_.tau / params_.c + additive_slack();
  }

  /// Stored point i, transformed, before sketching.
  Vector transformed_point(std::size_t id) const {
    const Stored &s = stored_.at(id);
    return transform_data_point(s.embedded, data_scale_);
  }

  void insert(std::size_t id, const Vector &point) {
    if (kind_ == InputKind::kTensor) {
      insert_stored(id, make_tensor(point));
    } else {
      insert_stored(id, make_flat(point));
    }
  }

  void erase(std::size_t id) {
    if (!stored_.contains(id)) throw NotFound("id " + std::to_string(id) + " not present");
    for (auto &per_sketch : replicas_afn_) {
      for (auto &afn : per_sketch) afn.erase(id);
    }
    stored_.erase(id);
  }

  /// Best candidate over the sampled sketches and replicas, without the
  /// acceptance check. x has the input length (tensor kind: side^2, row-major).
  std::optional<MinIpAnswer> query_candidate(const Vector &x, RngState &rng) const {
    const Vector embedded = embed_query(x);
    const double dy = embedded.norm();
    if (stored_.empty()) return std::nullopt;
    if (dy == 0.0) {
      const auto &[id, s] = *stored_.begin();
      return MinIpAnswer{id, 0.0, 0.0, 0.0};
    }
    const double grid = params_.lambda / static_cast<double>(ensemble_->rows() + 2);
    std::optional<MinIpAnswer> best;
    for (std::size_t j : ensemble_->sample(sampled_, rng)) {
      Vector q = Vector::Zero(static_cast<Eigen::Index>(ensemble_->rows() + 2));
      q.head(static_cast<Eigen::Index>(ensemble_->rows())) =
          ensemble_->apply_flat(j, embedded) / dy;
      for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = std::round(q[i] / grid) * grid;
      for (const auto &afn : replicas_afn_[j]) {
        auto far = afn.query(q);
        if (!far) continue;
        const double ip = stored_.at(far->id).embedded.dot(embedded);
        const double estimate =
            data_scale_ * dy * (1.0 - far->distance * far->distance / 2.0);
        if (!best || ip < best->inner_product ||
            (ip == best->inner_product && far->id < best->id)) {
          best = MinIpAnswer{far->id, ip, ip / (data_scale_ * dy), estimate};
        }
      }
    }
    return best;
  }

  std::optional<MinIpAnswer> query_candidate(const SquareMatrix &x, RngState &rng) const {
    return query_candidate(flatten(x), rng);
  }

  /// Thresholded query: Fail unless the best candidate meets tau/c + lambda~.
  std::optional<MinIpAnswer> query(const Vector &x, RngState &rng) const {
    auto best = query_candidate(x, rng);
    if (best && best->normalized > acceptance_threshold()) return std::nullopt;
    return best;
  }

  std::optional<MinIpAnswer> query(const SquareMatrix &x, RngState &rng) const {
    return query(flatten(x), rng);
  }

  nlohmann::json descriptor() const {
    return {{"input_kind", kind_ == InputKind::kFlat ? "flat" : "tensor"},
            {"c", params_.c},
            {"tau", params_.tau},
            {"epsilon", params_.epsilon},
            {"lambda", params_.lambda},
            {"delta", params_.delta},
            {"approximation_squared", cbar_sq_},
            {"regime", to_string(regime_)},
            {"replicas", replicas_},
            {"sampled_sketches", sampled_},
            {"data_scale", data_scale_},
            {"additive_slack", additive_slack()},
            {"ensemble", ensemble_->descriptor()}};
  }

 private:
  struct Stored {
    Vector factor;    // v for tensor inputs, padded y for flat inputs
    Vector embedded;  // vector of length side^2
  };

  RobustMinIpIndex(InputKind kind, std::size_t input_dim, std::size_t side,
                   MinIpParams params)
      : kind_(kind), input_dim_(input_dim), side_(side), params_(params) {
    regime_ = check_minip_window(params.c, params.tau, params.epsilon);
    cbar_sq_ = minip_approximation_squared(params.c, params.tau, params.epsilon);
    if (!(params.lambda > 0.0)) throw ConfigError("need lambda > 0");
    if (!(params.delta > 0.0 && params.delta < 1.0)) throw ConfigError("need 0 < delta < 1");
  }

  static Vector flatten(const SquareMatrix &x) {
    return Eigen::Map<const Vector>(x.data(), x.size());
  }

  Stored make_flat(const Vector &y) const {
    if (static_cast<std::size_t>(y.size()) != input_dim_) {
      throw DimensionMismatch("point length " + std::to_string(y.size()) + ", expected " +
                              std::to_string(input_dim_));
    }
    Vector padded = Vector::Zero(static_cast<Eigen::Index>(side_ * side_));
    padded.head(y.size()) = y;
    return {padded, padded};
  }

  Stored make_tensor(const Vector &v) const {
    if (static_cast<std::size_t>(v.size()) != side_) {
      throw DimensionMismatch("tensor factor length " + std::to_string(v.size()) +
                              ", expected " + std::to_string(side_));
    }
    SquareMatrix outer = v * v.transpose();
    return {v, flatten(outer)};
  }

  Vector embed_query(const Vector &x) const {
    const std::size_t expected = kind_ == InputKind::kFlat ? input_dim_ : side_ * side_;
    if (static_cast<std::size_t>(x.size()) != expected) {
      throw DimensionMismatch("query length " + std::to_string(x.size()) + ", expected " +
                              std::to_string(expected));
    }
    Vector padded = Vector::Zero(static_cast<Eigen::Index>(side_ * side_));
    padded.head(x.size()) = x;
    return padded;
  }

  Vector sketch_point(std::size_t j, const Stored &s) const {
    const Vector sketched = kind_ == InputKind::kTensor
                                ? ensemble_->apply_pair(j, s.factor, s.factor)
                                : ensemble_->apply_flat(j, s.embedded);
    const double ratio = s.embedded.squaredNorm() / (data_scale_ * data_scale_);
    if (ratio > 1.0 + 1e-12) {
      throw PreconditionViolation("point norm exceeds the data scale " +
                                  std::to_string(data_scale_));
    }
    Vector out(sketched.size() + 2);
    out.head(sketched.size()) = sketched / data_scale_;
    out[sketched.size()] = 0.0;
    out[sketched.size() + 1] = std::sqrt(std::max(0.0, 1.0 - ratio));
    return out;
  }

  void finish_build(std::map<std::size_t, Stored> stored, std::uint64_t seed,
                    std::optional<double> data_scale) {
    stored_ = std::move(stored);
    const std::size_t n = stored_.size();
    double dx = 0.0;
    for (const auto &[id, s] : stored_) dx = std::max(dx, s.embedded.norm());
    if (data_scale) {
      if (*data_scale < dx * (1.0 - 1e-12)) {
        throw PreconditionViolation("data scale below the largest norm");
      }
      dx = *data_scale;
    }
    data_scale_ = dx > 0.0 ? dx : 1.0;

    const SketchDefaults defaults =
        SketchDefaults::make(params_.epsilon, n, side_, params_.delta, params_.profile);
    SketchParams sp;
    sp.kind = params_.kind;
    sp.dim = side_;
    sp.rows = params_.sketch_rows != 0 ? params_.sketch_rows : defaults.rows;
    sp.sparsity = params_.sparsity != 0 ? params_.sparsity
                  : params_.sketch_rows != 0 ? 1
                                             : defaults.sparsity;
    const std::size_t k =
        params_.sketch_count != 0 ? params_.sketch_count : defaults.ensemble_size;
    ensemble_.emplace(sp, k, derive_seed(seed, 0), params_.epsilon, params_.delta,
                      theoretical_additive_floor(n, side_));

    const double s_dim = static_cast<double>(sp.rows + 2);
    if (params_.replicas != 0) {
      replicas_ = params_.replicas;
    } else {
      double kappa = params_.replica_constant * s_dim *
                     std::log(std::max(static_cast<double>(n) * s_dim /
                                           (params_.lambda * params_.delta),
                                       3.0));
      if (params_.profile == Profile::kDesk) kappa /= 4.0;
      replicas_ = static_cast<std::size_t>(std::max(1.0, std::ceil(kappa)));
    }
    sampled_ = params_.sampled_sketches != 0
                   ? params_.sampled_sketches
                   : static_cast<std::size_t>(
                         std::ceil(std::log(static_cast<double>(sp.rows))));
    sampled_ = std::clamp<std::size_t>(sampled_, 1, k);

    AfnParams ap = params_.afn;
    ap.approximation = std::sqrt(cbar_sq_);
    replicas_afn_.clear();
    replicas_afn_.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      std::vector<std::pair<std::size_t, Vector>> pts;
      pts.reserve(n);
      for (const auto &[id, s] : stored_) pts.emplace_back(id, sketch_point(j, s));
      std::vector<AfnStructure> per_sketch;
      per_sketch.reserve(replicas_);
      for (std::size_t r = 0; r < replicas_; ++r) {
        per_sketch.emplace_back(pts, sp.rows + 2, ap, derive_seed(derive_seed(seed, j + 1), r));
      }
      replicas_afn_.push_back(std::move(per_sketch));
    }
  }

  void insert_stored(std::size_t id, Stored s) {
    if (stored_.contains(id)) {
      throw PreconditionViolation("id " + std::to_string(id) + " already present");
    }
    for (std::size_t j = 0; j < replicas_afn_.size(); ++j) {
      const Vector p = sketch_point(j, s);
      for (auto &afn : replicas_afn_[j]) afn.insert(id, p);
    }
    stored_.emplace(id, std::move(s));
  }

  InputKind kind_;
  std::size_t input_dim_;
  std::size_t side_;
  MinIpParams params_;
  MinIpRegime regime_ = MinIpRegime::kSqrtN;
  double cbar_sq_ = 0.0;
  double data_scale_ = 1.0;
  std::size_t replicas_ = 1;
  std::size_t sampled_ = 1;
  std::optional<SketchEnsemble> ensemble_;
  std::map<std::size_t, Stored> stored_;
  std::vector<std::vector<AfnStructure>> replicas_afn_;
};

}  // namespace sparsekit
