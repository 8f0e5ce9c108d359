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
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ranges>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/random.hpp"

namespace sparsekit {

/// Ordered multiset of (key, id) pairs.
class SortedKeyList {
 public:
  using Entry = std::pair<double, std::size_t>;
  using Set = std::multiset<Entry>;
  using const_iterator = Set::const_iterator;
  using Range = std::ranges::subrange<const_iterator>;

  SortedKeyList() = default;
  explicit SortedKeyList(std::span<const Entry> entries)
      : entries_(entries.begin(), entries.end()) {}

  void insert(double key, std::size_t id) { entries_.emplace(key, id); }

  void erase(double key, std::size_t id) {
    auto it = entries_.find(Entry{key, id});
    if (it == entries_.end()) {
      throw NotFound("entry (" + std::to_string(key) + ", " + std::to_string(id) +
                     ") is not in the list");
    }
    entries_.erase(it);
  }

  /// Entries with key <= t, in key order.
  Range search_leq(double t) const {
    return {entries_.begin(),
            entries_.upper_bound(Entry{t, std::numeric_limits<std::size_t>::max()})};
  }

  /// Entries with key >= t, in key order.
  Range search_geq(double t) const {
    return {entries_.lower_bound(Entry{t, 0}), entries_.end()};
  }

  const Entry &min() const {
    if (entries_.empty()) throw NotFound("min of an empty list");
    return *entries_.begin();
  }
  const Entry &max() const {
    if (entries_.empty()) throw NotFound("max of an empty list");
    return *entries_.rbegin();
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const_iterator begin() const noexcept { return entries_.begin(); }
  const_iterator end() const noexcept { return entries_.end(); }

  friend bool operator==(const SortedKeyList &, const SortedKeyList &) = default;

 private:
  Set entries_;
};

/// Points keyed by id, shared by the structures that index them.
using PointStore = std::map<std::size_t, Vector>;

struct FarAnswer {
  std::size_t id = 0;
  double distance = 0.0;
};

/// Root t >= 1 of e^{t^2/2} / t = 2n, by bisection.
inline double dfn_threshold(std::size_t n) {
  const double target = std::log(2.0 * static_cast<double>(std::max<std::size_t>(n, 1)));
  auto f = [&](double t) { return t * t / 2.0 - std::log(t) - target; };
  double lo = 1.0, hi = 2.0;
  while (f(hi) < 0.0) hi *= 2.0;
  while (hi - lo > 1e-12 * hi) {
    const double mid = (lo + hi) / 2.0;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return (lo + hi) / 2.0;
}

/// l = max(1, ceil(c1 n^{1/cbar^2} log^{(1 - 1/cbar^2)/2} n)).
inline std::size_t dfn_direction_count(std::size_t n, double approximation,
                                       double constant) {
  const double inv = 1.0 / (approximation * approximation);
  const double nn = static_cast<double>(std::max<std::size_t>(n, 1));
  const double log_n = std::log(nn);
  const double value =
      constant * std::pow(nn, inv) * std::pow(std::max(log_n, 0.0), (1.0 - inv) / 2.0);
  return static_cast<std::size_t>(std::max(1.0, std::ceil(value)));
}

struct DfnParams {
  double approximation = 2.0;  // cbar > 1
  double direction_constant = 1.0;
  std::size_t directions = 0;  // 0 selects the formula
};

/// Random-projection structure answering the decision furthest-neighbor
/// problem: returns a point at distance >= r/cbar when one at distance >= r
/// exists, with constant probability.
class DfnStructure {
 public:
  DfnStructure(std::shared_ptr<const PointStore> store, std::size_t dim,
               DfnParams params, std::uint64_t seed)
      : store_(std::move(store)), dim_(dim), params_(params), seed_(seed) {
    if (!(params.approximation > 1.0)) {
      throw ConfigError("approximation factor must exceed 1");
    }
    const std::size_t n = store_->size();
    directions_count_ = params.directions != 0
                            ? params.directions
                            : dfn_direction_count(n, params.approximation,
                                                  params.direction_constant);
    t_ = dfn_threshold(n);
    CounterRng rng(seed);
    directions_.resize(static_cast<Eigen::Index>(directions_count_),
                       static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < directions_.rows(); ++i)
      for (Eigen::Index j = 0; j < directions_.cols(); ++j)
        directions_(i, j) = rng.gaussian();
    lists_.resize(directions_count_);
    for (const auto &[id, p] : *store_) add_keys(id, p);
  }

  /// Standalone build over points with ids 0..n-1.
  static DfnStructure build(std::span<const Vector> points, DfnParams params,
                            std::uint64_t seed) {
    if (points.empty()) throw PreconditionViolation("DFN build needs n >= 1");
    auto store = std::make_shared<PointStore>();
    for (std::size_t i = 0; i < points.size(); ++i) store->emplace(i, points[i]);
    DfnStructure d(store, static_cast<std::size_t>(points[0].size()), params, seed);
    d.owned_ = std::move(store);
    return d;
  }

  std::size_t direction_count() const noexcept { return directions_count_; }
  double threshold_t() const noexcept { return t_; }
  double approximation() const noexcept { return params_.approximation; }
  std::size_t size() const noexcept { return lists_.empty() ? 0 : lists_[0].size(); }
  const SortedKeyList &list(std::size_t i) const { return lists_.at(i); }
  Vector direction(std::size_t i) const {
    return directions_.row(static_cast<Eigen::Index>(i)).transpose();
  }

  /// Standalone insert; with a shared store the owner updates the store and
  /// calls add_keys instead.
  void insert(std::size_t id, const Vector &p) {
    if (!owned_) throw PreconditionViolation("insert on a structure with a shared store");
    if (owned_->contains(id)) {
      throw PreconditionViolation("id " + std::to_string(id) + " already present");
    }
    owned_->emplace(id, p);
    add_keys(id, p);
  }

  void erase(std::size_t id) {
    if (!owned_) throw PreconditionViolation("erase on a structure with a shared store");
    auto it = owned_->find(id);
    if (it == owned_->end()) throw NotFound("id " + std::to_string(id) + " not present");
    remove_keys(id, it->second);
    owned_->erase(it);
  }

  void add_keys(std::size_t id, const Vector &p) {
    for (std::size_t i = 0; i < directions_count_; ++i) lists_[i].insert(key(i, p), id);
  }

  void remove_keys(std::size_t id, const Vector &p) {
    for (std::size_t i = 0; i < directions_count_; ++i) lists_[i].erase(key(i, p), id);
  }

  double key(std::size_t i, const Vector &p) const {
    return directions_.row(static_cast<Eigen::Index>(i)).dot(p);
  }

  /// Collects up to 2l+1 candidates whose projections differ from the query's
  /// by at least r t / cbar, then returns the furthest one at distance
  /// >= r / cbar.
  std::optional<FarAnswer> query(const Vector &q, double r) const {
    if (!(r > 0.0)) throw PreconditionViolation("DFN radius must be positive");
    const double threshold = r * t_ / params_.approximation;
    const std::size_t cap = 2 * directions_count_ + 1;
    std::vector<std::size_t> candidates;
    candidates.reserve(cap);
    for (std::size_t i = 0; i < directions_count_ && candidates.size() < cap; ++i) {
      const double kq = key(i, q);
      for (const auto &entry : lists_[i].search_leq(kq - threshold)) {
        if (candidates.size() == cap) break;
        candidates.push_back(entry.second);
      }
      const auto upper = lists_[i].search_geq(kq + threshold);
      for (auto it = upper.end(); it != upper.begin() && candidates.size() < cap;) {
        --it;
        candidates.push_back(it->second);
      }
    }
    const double floor = r / params_.approximation;
    std::optional<FarAnswer> best;
    for (std::size_t id : candidates) {
      const double dist = (store_->at(id) - q).norm();
      if (dist >= floor && (!best || dist > best->distance ||
                            (dist == best->distance && id < best->id))) {
        best = FarAnswer{id, dist};
      }
    }
    return best;
  }

 private:
  std::shared_ptr<const PointStore> store_;
  std::shared_ptr<PointStore> owned_;
  std::size_t dim_;
  DfnParams params_;
  std::uint64_t seed_;
  std::size_t directions_count_ = 1;
  double t_ = 1.0;
  Eigen::MatrixXd directions_;
  std::vector<SortedKeyList> lists_;
};

struct AfnParams {
  double approximation = 2.0;  // cbar
  double precision = 0.1;      // delta: answers are (cbar + delta)-approximate
  double copies_constant = 3.0;
  std::size_t copies = 0;  // 0 selects ceil(c * log log(d/delta))
  double direction_constant = 1.0;
  std::size_t directions = 0;
};

/// Diagnostics of one AFN query.
struct AfnTrace {
  double lo = 0.0;
  double hi = 0.0;
  double accepted_radius = 0.0;
  std::size_t rounds = 0;
  bool far_query = false;
};

inline std::size_t afn_copy_count(std::size_t dim, double precision, double constant) {
  const double inner = std::log(std::max(static_cast<double>(dim) / precision, 3.0));
  return static_cast<std::size_t>(std::max(1.0, std::ceil(constant * std::log(inner))));
}

/// (cbar + delta)-approximate furthest neighbor: s independent DFN copies and
/// a geometric binary search over radii bracketed by the box width.
class AfnStructure {
 public:
  AfnStructure(std::span<const std::pair<std::size_t, Vector>> points, std::size_t dim,
               AfnParams params, std::uint64_t seed)
      : store_(std::make_shared<PointStore>()), dim_(dim), params_(params), seed_(seed),
        coordinates_(dim) {
    if (!(params.approximation > 1.0)) throw ConfigError("AFN needs cbar > 1");
    if (!(params.precision > 0.0)) throw ConfigError("AFN needs delta > 0");
    for (const auto &[id, p] : points) {
      check_dim(p);
      if (!store_->emplace(id, p).second) {
        throw PreconditionViolation("duplicate id " + std::to_string(id));
      }
      add_coordinates(id, p);
    }
    const std::size_t copies = params.copies != 0
                                   ? params.copies
                                   : afn_copy_count(dim, params.precision,
                                                    params.copies_constant);
    DfnParams dp{params.approximation, params.direction_constant, params.directions};
    copies_.reserve(copies);
    for (std::size_t c = 0; c < copies; ++c) {
      copies_.emplace_back(store_, dim_, dp, derive_seed(seed, c));
    }
    refresh_boxwidth();
  }

  AfnStructure(const AfnStructure &) = delete;
  AfnStructure &operator=(const AfnStructure &) = delete;
  AfnStructure(AfnStructure &&) noexcept = default;
  AfnStructure &operator=(AfnStructure &&) noexcept = default;

  static AfnStructure build(std::span<const Vector> points, AfnParams params,
                            std::uint64_t seed) {
    if (points.empty()) throw PreconditionViolation("AFN build needs n >= 1");
    std::vector<std::pair<std::size_t, Vector>> indexed;
    indexed.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) indexed.emplace_back(i, points[i]);
    return AfnStructure(indexed, static_cast<std::size_t>(points[0].size()), params, seed);
  }

  std::size_t size() const noexcept { return store_->size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t copy_count() const noexcept { return copies_.size(); }
  const DfnStructure &copy(std::size_t i) const { return copies_.at(i); }
  double boxwidth() const noexcept { return boxwidth_; }
  bool contains(std::size_t id) const { return store_->contains(id); }
  const Vector &point(std::size_t id) const { return store_->at(id); }

  void insert(std::size_t id, const Vector &p) {
    check_dim(p);
    if (store_->contains(id)) {
      throw PreconditionViolation("id " + std::to_string(id) + " already present");
    }
    store_->emplace(id, p);
    add_coordinates(id, p);
    for (auto &c : copies_) c.add_keys(id, p);
    refresh_boxwidth();
  }

  void erase(std::size_t id) {
    auto it = store_->find(id);
    if (it == store_->end()) throw NotFound("id " + std::to_string(id) + " not present");
    const Vector p = it->second;
    for (auto &c : copies_) c.remove_keys(id, p);
    for (std::size_t j = 0; j < dim_; ++j) {
      coordinates_[j].erase(p[static_cast<Eigen::Index>(j)], id);
    }
    store_->erase(it);
    refresh_boxwidth();
  }

  std::optional<FarAnswer> query(const Vector &q, AfnTrace *trace = nullptr) const {
    check_dim(q);
    if (store_->empty()) return std::nullopt;
    if (boxwidth_ == 0.0) {
      const auto &[id, p] = *store_->begin();
      return FarAnswer{id, (p - q).norm()};
    }
    const double cbar = params_.approximation;
    double lo = boxwidth_ / 2.0;
    double hi = std::sqrt(static_cast<double>(dim_)) / (cbar - 1.0) * boxwidth_;
    AfnTrace local;
    AfnTrace &t = trace ? *trace : local;
    t = AfnTrace{lo, hi, 0.0, 0, false};

    std::optional<FarAnswer> best;
    auto succeeds = [&](double r) {
      ++t.rounds;
      bool any = false;
      for (const auto &c : copies_) {
        if (auto a = c.query(q, r)) {
          any = true;
          if (!best || a->distance > best->distance ||
              (a->distance == best->distance && a->id < best->id)) {
            best = a;
          }
        }
      }
      return any;
    };

    if (!succeeds(lo)) return std::nullopt;
    t.accepted_radius = lo;
    if (hi <= lo || succeeds(hi)) {
      t.far_query = true;
      t.accepted_radius = std::max(lo, hi);
      t.lo = t.hi = t.accepted_radius;
      return best;
    }
    const double target = 1.0 + params_.precision / cbar;
    while (hi / lo > target) {
      const double mid = std::sqrt(lo * hi);
      if (succeeds(mid)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    t.lo = lo;
    t.hi = hi;
    t.accepted_radius = lo;
    return best;
  }

 private:
  void check_dim(const Vector &p) const {
    if (static_cast<std::size_t>(p.size()) != dim_) {
      throw DimensionMismatch("point of length " + std::to_string(p.size()) +
                              " in a structure of dimension " + std::to_string(dim_));
    }
  }

  void add_coordinates(std::size_t id, const Vector &p) {
    for (std::size_t j = 0; j < dim_; ++j) {
      coordinates_[j].insert(p[static_cast<Eigen::Index>(j)], id);
    }
  }

  void refresh_boxwidth() {
    boxwidth_ = 0.0;
    if (store_->empty()) return;
    for (const auto &list : coordinates_) {
      boxwidth_ = std::max(boxwidth_, list.max().first - list.min().first);
    }
  }

  std::shared_ptr<PointStore> store_;
  std::size_t dim_;
  AfnParams params_;
  std::uint64_t seed_;
  std::vector<SortedKeyList> coordinates_;
  std::vector<DfnStructure> copies_;
  double boxwidth_ = 0.0;
};

/// Exhaustive furthest neighbor; ties to the smallest id.
inline FarAnswer exact_furthest(std::span<const Vector> points, const Vector &q) {
  if (points.empty()) throw PreconditionViolation("empty dataset");
  FarAnswer best{0, (points[0] - q).norm()};
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double d = (points[i] - q).norm();
    if (d > best.distance) best = {i, d};
  }
  return best;
}

}  // namespace sparsekit
