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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparsekit/aipe.hpp"
#include "sparsekit/backend.hpp"
#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/minip.hpp"
#include "sparsekit/random.hpp"

namespace sparsekit {

/// a_i = 1/sqrt(N) + (1 + 1/(sqrt(N) - 1)) i / m for i = 0..n.
inline std::vector<double> ks_barrier_sequence(std::size_t groups, std::size_t m,
                                               std::size_t n) {
  if (groups < 2) throw ConfigError("need N >= 2");
  if (!(n < m)) throw ConfigError("need n < m");
  const double root = std::sqrt(static_cast<double>(groups));
  const double slope = (1.0 + 1.0 / (root - 1.0)) / static_cast<double>(m);
  std::vector<double> a(n + 1);
  for (std::size_t i = 0; i <= n; ++i) a[i] = 1.0 / root + slope * static_cast<double>(i);
  return a;
}

/// q = M^2 / (tr N - tr M) + M with M = (a_next I - T)^{-1}, N = (a_prev I - T)^{-1};
/// <q, v v'> is the greedy score of v.
inline SquareMatrix ks_query_matrix(const SquareMatrix &t, double a_prev, double a_next) {
  const EigenDecomposition eig = eigen_sym(t);
  const double drop = barrier_upper(eig, a_prev) - barrier_upper(eig, a_next);
  if (!(drop > 0.0)) throw BarrierViolation("barrier potentials do not decrease");
  return spectral_apply(eig, [&](double x) {
    const double g = 1.0 / (a_next - x);
    return g * g / drop + g;
  });
}

struct KsOptions {
  std::size_t groups = 2;  // N
  std::size_t count = 1;   // n
  Backend backend = Backend::kExact;
  double c = 1.0;
  double tau = 0.5;
  double delta = 0.1;
  std::uint64_t seed = 0;
  double tolerance = 1e-9;  // norm and isotropy checks
  AdeParams aipe{};         // epsilon is derived from (c, tau)
  MinIpParams afn{};        // c and tau are taken from these options
};

struct KsResult {
  WeightedSelection selection;
  std::vector<std::size_t> order;
  std::vector<double> scores;      // exact score of each chosen index
  std::vector<double> potentials;  // Phi^{a_j}(T_j), j = 0..n
  std::vector<double> barriers;    // a_0..a_n
  double beta = 1.0;
  double final_norm = 0.0;  // |sum_{i in S} v_i v_i'|
  double bound = 0.0;       // beta * a_n
  std::size_t fallbacks = 0;
  Backend backend = Backend::kExact;
};

namespace detail {

inline void check_ks_input(const VectorFamily &v, std::size_t groups, std::size_t n,
                           double tol) {
  if (v.empty()) throw PreconditionViolation("empty family");
  if (v.size() != v.dim() * groups) {
    throw PreconditionViolation("need m = d N; got m = " + std::to_string(v.size()) +
                                ", d N = " + std::to_string(v.dim() * groups));
  }
  if (!(n < v.size())) throw ConfigError("need n < m");
  const double target = 1.0 / std::sqrt(static_cast<double>(groups));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i].norm() - target) > tol) {
      throw PreconditionViolation("|v_" + std::to_string(i) + "| = " +
                                  std::to_string(v[i].norm()) + ", expected 1/sqrt(N)");
    }
  }
  if (!check_isotropy(v, std::max(tol, 1e-12) * static_cast<double>(v.dim()))) {
    throw IsotropyViolation("sum_i v_i v_i' differs from I");
  }
}

/// Exact minimum score among the unselected indices; ties to the smallest index.
inline std::optional<std::pair<std::size_t, double>> ks_min_score(
    const VectorFamily &v, const std::vector<bool> &taken, const SquareMatrix &q) {
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (taken[i]) continue;
    const double s = quadratic_form(v[i], q);
    if (!best || s < best->second) best = {i, s};
  }
  return best;
}

}  // namespace detail

/// Barrier greedy with T_j = (1/beta) sum_{i in S_j} v_i v_i'. The exact
/// backend picks the minimum score; the approximate backends take the
/// structure's answer when its score is at most beta and scan otherwise.
inline KsResult ks_select(const VectorFamily &v, const KsOptions &opt) {
  detail::check_ks_input(v, opt.groups, opt.count, opt.tolerance);
  KsResult r;
  r.backend = opt.backend;
  if (opt.backend != Backend::kExact) {
    check_backend_window(opt.backend, opt.c, opt.tau);
    r.beta = 1.0 / opt.c;
  }
  const std::size_t m = v.size();
  const std::size_t d = v.dim();
  r.barriers = ks_barrier_sequence(opt.groups, m, opt.count);

  std::vector<Vector> flat;
  std::optional<AdaptiveInnerProductEstimator> aipe;
  std::optional<RobustMinIpIndex> afn;
  if (opt.backend == Backend::kAipe) {
    AdeParams p = opt.aipe;
    p.epsilon = aipe_epsilon(opt.c, opt.tau);
    p.delta = opt.delta;
    flat.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      const SquareMatrix outer = v[i] * v[i].transpose();
      flat.emplace_back(Eigen::Map<const Vector>(outer.data(), outer.size()));
    }
    aipe.emplace(flat, p, opt.seed);
  } else if (opt.backend == Backend::kAfn) {
    MinIpParams p = opt.afn;
    p.c = opt.c;
    p.tau = opt.tau;
    p.delta = opt.delta;
    afn.emplace(RobustMinIpIndex::over_outer_products(v, p, opt.seed));
  }
  RngState rng(derive_seed(opt.seed, 0x6b73));

  const auto di = static_cast<Eigen::Index>(d);
  SquareMatrix t = SquareMatrix::Zero(di, di);
  std::vector<bool> taken(m, false);
  r.potentials.push_back(barrier_upper(eigen_sym(t), r.barriers[0]));

  for (std::size_t j = 0; j < opt.count; ++j) {
    const SquareMatrix q = ks_query_matrix(t, r.barriers[j], r.barriers[j + 1]);
    std::optional<std::pair<std::size_t, double>> pick;
    if (opt.backend == Backend::kAipe) {
      const SquareMatrix scaled = opt.tau * q;
      const auto e = aipe->query_min(Eigen::Map<const Vector>(scaled.data(), scaled.size()), rng);
      pick = std::make_pair(e.id, quadratic_form(v[e.id], q));
    } else if (opt.backend == Backend::kAfn) {
      const SquareMatrix scaled = opt.tau * q;
      if (auto e = afn->query_candidate(scaled, rng)) {
        pick = std::make_pair(e->id, quadratic_form(v[e->id], q));
      }
    }
    if (opt.backend != Backend::kExact && (!pick || !(pick->second <= r.beta))) {
      ++r.fallbacks;
      pick.reset();
    }
    if (!pick) {
      pick = detail::ks_min_score(v, taken, q);
      if (!pick || !(pick->second <= r.beta)) {
        throw BarrierCollapse("no index keeps the barrier potential bounded at step " +
                              std::to_string(j) + " (min score " +
                              (pick ? std::to_string(pick->second) : "none") + ")");
      }
    }
    const std::size_t i = pick->first;
    taken[i] = true;
    r.order.push_back(i);
    r.scores.push_back(pick->second);
    r.selection.add(i, 1.0);
    t.noalias() += (1.0 / r.beta) * v[i] * v[i].transpose();
    t = (t + t.transpose()) / 2.0;
    if (aipe) aipe->erase(i);
    if (afn) afn->erase(i);
    r.potentials.push_back(barrier_upper(eigen_sym(t), r.barriers[j + 1]));
  }
  r.final_norm = eigen_sym(r.selection.weighted_gram(v)).values[di - 1];
  r.bound = r.beta * r.barriers.back();
  return r;
}

inline KsResult ks_greedy_exact(const VectorFamily &v, std::size_t groups, std::size_t n) {
  KsOptions opt;
  opt.groups = groups;
  opt.count = n;
  return ks_select(v, opt);
}

}  // namespace sparsekit
