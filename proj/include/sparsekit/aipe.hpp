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
#include <span>
#include <string>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/minip.hpp"
#include "sparsekit/random.hpp"
#include "sparsekit/sketch.hpp"

namespace sparsekit {

struct AdeParams {
  double epsilon = 0.1;
  double delta = 0.01;
  double sketch_constant = 1.0;      // c2 in k' = c2 (dim + log 1/delta) log m
  std::size_t sketch_count = 0;      // 0: formula
  std::size_t sampled_sketches = 0;  // 0: ceil(3 log k')
  Profile profile = Profile::kFull;
};

inline std::size_t ade_sketch_count(std::size_t dim, std::size_t points, double delta,
                                    double constant, Profile profile = Profile::kFull) {
  double k = constant * (static_cast<double>(dim) + std::log(1.0 / delta)) *
             std::log(std::max(static_cast<double>(points), 2.0));
  if (profile == Profile::kDesk) k /= 4.0;
  return static_cast<std::size_t>(std::max(1.0, std::ceil(k)));
}

inline std::size_t ade_sketch_rows(double epsilon) {
  return static_cast<std::size_t>(std::ceil(8.0 / (epsilon * epsilon)));
}

struct DistanceEstimate {
  std::size_t id = 0;
  double distance = 0.0;
};

/// Adaptive distance estimation over a dynamic point set: k' Gaussian
/// sketches of dimension ceil(8/eps^2) with cached sketched points; each query
/// samples a few sketches and reports the per-point median estimate.
class DistanceEstimator {
 public:
  DistanceEstimator(std::span<const Vector> points, AdeParams params, std::uint64_t seed)
      : DistanceEstimator(points.empty() ? 0 : static_cast<std::size_t>(points[0].size()),
                          points.size(), params, seed) {
    if (points.empty()) throw PreconditionViolation("distance estimator needs m >= 1");
    for (std::size_t i = 0; i < points.size(); ++i) insert(i, points[i]);
  }

  /// Empty estimator sized for about expected_points points.
  DistanceEstimator(std::size_t dim, std::size_t expected_points, AdeParams params,
                    std::uint64_t seed)
      : dim_(dim), params_(params), seed_(seed) {
    if (!(params.epsilon > 0.0 && params.epsilon < 1.0)) {
      throw ConfigError("need 0 < epsilon < 1");
    }
    if (!(params.delta > 0.0 && params.delta < 1.0)) throw ConfigError("need 0 < delta < 1");
    rows_ = ade_sketch_rows(params.epsilon);
    const std::size_t k =
        params.sketch_count != 0
            ? params.sketch_count
            : ade_sketch_count(dim, expected_points, params.delta,
                               params.sketch_constant, params.profile);
    sampled_ = params.sampled_sketches != 0
                   ? params.sampled_sketches
                   : static_cast<std::size_t>(
                         std::ceil(3.0 * std::log(static_cast<double>(std::max<std::size_t>(k, 2)))));
    sampled_ = std::clamp<std::size_t>(sampled_, 1, k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(rows_));
    sketches_.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
      CounterRng rng(derive_seed(seed, j));
      Eigen::MatrixXd g(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(dim_));
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.gaussian() * scale;
      sketches_.push_back(std::move(g));
    }
    cache_.assign(k, Eigen::MatrixXd(static_cast<Eigen::Index>(rows_), 0));
  }

  std::size_t size() const noexcept { return slots_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t sketch_count() const noexcept { return sketches_.size(); }
  std::size_t sketch_rows() const noexcept { return rows_; }
  std::size_t sampled_sketches() const noexcept { return sampled_; }
  bool contains(std::size_t id) const { return slots_.contains(id); }

  std::vector<std::size_t> ids() const {
    std::vector<std::size_t> out;
    out.reserve(slots_.size());
    for (const auto &[id, slot] : slots_) out.push_back(id);
    return out;
  }

  void insert(std::size_t id, const Vector &z) {
    check_dim(z);
    if (slots_.contains(id)) {
      throw PreconditionViolation("id " + std::to_string(id) + " already present");
    }
    std::size_t slot;
    if (!free_.empty()) {
      slot = free_.back();
      free_.pop_back();
    } else {
      slot = capacity_++;
      for (auto &c : cache_) c.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(capacity_));
    }
    slots_.emplace(id, slot);
    write_slot(slot, z);
  }

  /// Replaces the stored vector of an existing id.
  void update(std::size_t id, const Vector &z) {
    check_dim(z);
    write_slot(slot_of(id), z);
  }

  void erase(std::size_t id) {
    const std::size_t slot = slot_of(id);
    slots_.erase(id);
    free_.push_back(slot);
  }

  /// Estimates of |x_i - q| for every stored point, in id order.
  std::vector<DistanceEstimate> query(const Vector &q, RngState &rng) const {
    check_dim(q);
    const auto chosen = sample_without_replacement(rng, sketches_.size(), sampled_);
    std::vector<Vector> sketched_q;
    sketched_q.reserve(chosen.size());
    for (std::size_t j : chosen) sketched_q.push_back(sketches_[j] * q);
    std::vector<DistanceEstimate> out;
    out.reserve(slots_.size());
    std::vector<double> samples(chosen.size());
    for (const auto &[id, slot] : slots_) {
      for (std::size_t t = 0; t < chosen.size(); ++t) {
        samples[t] = (cache_[chosen[t]].col(static_cast<Eigen::Index>(slot)) - sketched_q[t]).norm();
      }
      auto mid = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2);
      std::nth_element(samples.begin(), mid, samples.end());
      out.push_back({id, *mid});
    }
    return out;
  }

 private:
  void check_dim(const Vector &z) const {
    if (static_cast<std::size_t>(z.size()) != dim_) {
      throw DimensionMismatch("vector of length " + std::to_string(z.size()) +
                              ", estimator dimension " + std::to_string(dim_));
    }
  }

  std::size_t slot_of(std::size_t id) const {
    auto it = slots_.find(id);
    if (it == slots_.end()) throw NotFound("id " + std::to_string(id) + " not present");
    return it->second;
  }

  void write_slot(std::size_t slot, const Vector &z) {
    for (std::size_t j = 0; j < sketches_.size(); ++j) {
      cache_[j].col(static_cast<Eigen::Index>(slot)) = sketches_[j] * z;
    }
  }

  std::size_t dim_;
  AdeParams params_;
  std::uint64_t seed_;
  std::size_t rows_ = 1;
  std::size_t sampled_ = 1;
  std::vector<Eigen::MatrixXd> sketches_;
  std::vector<Eigen::MatrixXd> cache_;  // per sketch, one column per slot
  std::map<std::size_t, std::size_t> slots_;
  std::vector<std::size_t> free_;
  std::size_t capacity_ = 0;
};

struct InnerProductEstimate {
  std::size_t id = 0;
  double value = 0.0;     // estimate of <q, x_id>
  double distance = 0.0;  // estimated distance between transformed points
};

/// Estimates every <q, x_i> from distances between transformed unit vectors:
/// <q, x_i> ~ D |q| (1 - d_i^2 / 2). The radius D only grows.
class AdaptiveInnerProductEstimator {
 public:
  AdaptiveInnerProductEstimator(std::span<const Vector> points, AdeParams params,
                                std::uint64_t seed)
      : estimator_(points.empty() ? 0 : static_cast<std::size_t>(points[0].size()) + 2,
                   points.size(), params, seed) {
    if (points.empty()) throw PreconditionViolation("AIPE needs m >= 1");
    dim_ = static_cast<std::size_t>(points[0].size());
    for (const auto &p : points) radius_ = std::max(radius_, p.norm());
    if (radius_ == 0.0) radius_ = 1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      check_dim(points[i]);
      raw_.emplace(i, points[i]);
      estimator_.insert(i, transform_data_point(points[i], radius_));
    }
  }

  std::size_t size() const noexcept { return raw_.size(); }
  double radius() const noexcept { return radius_; }
  const DistanceEstimator &estimator() const noexcept { return estimator_; }
  const Vector &point(std::size_t id) const { return raw_.at(id); }
  bool contains(std::size_t id) const { return raw_.contains(id); }

  void insert(std::size_t id, const Vector &x) {
    check_dim(x);
    if (raw_.contains(id)) {
      throw PreconditionViolation("id " + std::to_string(id) + " already present");
    }
    if (x.norm() > radius_) {
      radius_ = x.norm();
      for (const auto &[other, p] : raw_) {
        estimator_.update(other, transform_data_point(p, radius_));
      }
    }
    estimator_.insert(id, transform_data_point(x, radius_));
    raw_.emplace(id, x);
  }

  void erase(std::size_t id) {
    if (!raw_.contains(id)) throw NotFound("id " + std::to_string(id) + " not present");
    estimator_.erase(id);
    raw_.erase(id);
  }

  std::vector<InnerProductEstimate> query_all(const Vector &q, RngState &rng) const {
    check_dim(q);
    const double qn = q.norm();
    const Vector psi = qn > 0.0 ? transform_query_point(q, qn) : Vector::Zero(q.size() + 2);
    std::vector<InnerProductEstimate> out;
    out.reserve(raw_.size());
    for (const auto &e : estimator_.query(psi, rng)) {
      const double w = qn > 0.0 ? 1.0 - e.distance * e.distance / 2.0 : 0.0;
      out.push_back({e.id, radius_ * qn * w, e.distance});
    }
    return out;
  }

  /// Point with the largest estimated distance, i.e. the estimated minimum
  /// inner product; ties to the smallest id.
  InnerProductEstimate query_min(const Vector &q, RngState &rng) const {
    const auto all = query_all(q, rng);
    if (all.empty()) throw PreconditionViolation("query on an empty set");
    InnerProductEstimate best = all.front();
    for (const auto &e : all) {
      if (e.distance > best.distance) best = e;
    }
    return best;
  }

 private:
  void check_dim(const Vector &x) const {
    if (static_cast<std::size_t>(x.size()) != dim_) {
      throw DimensionMismatch("vector of length " + std::to_string(x.size()) +
                              ", expected " + std::to_string(dim_));
    }
  }

  DistanceEstimator estimator_;
  std::size_t dim_ = 0;
  double radius_ = 0.0;
  std::map<std::size_t, Vector> raw_;
};

}  // namespace sparsekit
