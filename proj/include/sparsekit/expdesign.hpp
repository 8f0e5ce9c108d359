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
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparsekit/aipe.hpp"
#include "sparsekit/backend.hpp"
#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/minip.hpp"
#include "sparsekit/random.hpp"

namespace sparsekit {

namespace detail {

inline double inverse_square_sum(const Vector &lambda, double alpha, double c) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double g = c + alpha * lambda[i];
    s += 1.0 / (g * g);
  }
  return s;
}

inline double solve_normalizer(const Vector &lambda, double alpha) {
  const double d = static_cast<double>(lambda.size());
  const double floor = -alpha * lambda.minCoeff();
  // At floor + sqrt(d) every term is at most 1/d.
  double lo = floor;
  double hi = floor + std::sqrt(d);
  for (int it = 0; it < 400; ++it) {
    const double mid = lo + (hi - lo) / 2.0;
    if (mid <= lo || mid >= hi) break;
    if (inverse_square_sum(lambda, alpha, mid) > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double f_lo = inverse_square_sum(lambda, alpha, lo);
  const double f_hi = inverse_square_sum(lambda, alpha, hi);
  return (lo > floor && std::abs(f_lo - 1.0) < std::abs(f_hi - 1.0)) ? lo : hi;
}

}  // namespace detail

/// The c with sum_i (c + alpha lambda_i(Z))^{-2} = 1 and c > -alpha lambda_min(Z).
inline double find_ct(const SquareMatrix &z, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("need alpha > 0");
  return detail::solve_normalizer(eigen_sym(z).values, alpha);
}

/// A = (c I + alpha Z)^{-2} normalized to unit trace, and its square root.
struct DesignMatrices {
  double c = 0.0;
  SquareMatrix a;
  SquareMatrix a_half;
};

inline DesignMatrices design_matrices(const SquareMatrix &z, double alpha) {
  if (!(alpha > 0.0)) throw ConfigError("need alpha > 0");
  const EigenDecomposition eig = eigen_sym(z);
  DesignMatrices out;
  out.c = detail::solve_normalizer(eig.values, alpha);
  out.a_half = spectral_apply(eig, [&](double l) { return 1.0 / (out.c + alpha * l); });
  out.a = spectral_apply(eig, [&](double l) {
    const double g = out.c + alpha * l;
    return 1.0 / (g * g);
  });
  return out;
}

/// Gains for adding (plus) and removing (minus) x. minus is empty when
/// beta - 2 alpha <A^{1/2}, x x'> <= 0, i.e. x may not be removed.
struct BScores {
  double plus = 0.0;
  std::optional<double> minus;
};

inline BScores b_scores(const SquareMatrix &a, const SquareMatrix &a_half, const Vector &x,
                        double alpha, double beta) {
  const double ax = quadratic_form(x, a);
  const double hx = quadratic_form(x, a_half);
  BScores s;
  s.plus = ax / (beta + 2.0 * alpha * hx);
  const double den = beta - 2.0 * alpha * hx;
  if (den > 0.0) s.minus = ax / den;
  return s;
}

/// q = (beta n / (1 - eps)) A + 2 alpha A^{1/2}: for eligible x,
/// <q, x x'> <= beta exactly when B^-(x) <= (1 - eps) / (beta n).
inline SquareMatrix swap_query_matrix(const SquareMatrix &a, const SquareMatrix &a_half,
                                      std::size_t n, double epsilon, double alpha,
                                      double beta) {
  if (a.rows() != a_half.rows() || a.cols() != a_half.cols()) {
    throw DimensionMismatch("A and A^{1/2} differ in shape");
  }
  SquareMatrix q = (beta * static_cast<double>(n) / (1.0 - epsilon)) * a + 2.0 * alpha * a_half;
  return (q + q.transpose()) / 2.0;
}

/// Minimum design size for the swap argument: 6 d / eps^2 / (gamma - 1 - beta).
inline double expdesign_min_size(std::size_t d, double epsilon, double gamma, double beta) {
  return 6.0 * static_cast<double>(d) / (epsilon * epsilon) / (gamma - 1.0 - beta);
}

struct SwapOptions {
  std::size_t count = 1;  // n
  double epsilon = 1.0 / 3.0;
  double gamma = 3.0;
  double c = 1.0;
  double tau = 0.5;
  double delta = 0.1;
  Backend backend = Backend::kExact;
  std::uint64_t seed = 0;
  bool whiten_input = false;
  bool enforce_size_condition = true;
  bool instrument = true;  // exhaustive B-score scans each iteration
  double isotropy_tolerance = 1e-8;
  double exit_tolerance = 1e-9;  // exit needs lambda_min > 1 - gamma eps + this
  std::optional<std::size_t> iteration_limit;  // replaces T = ceil(n / (c eps)) when set
  AdeParams aipe{};   // epsilon is derived from (c, tau)
  MinIpParams afn{};  // c, tau, delta are taken from these options
};

struct SwapStep {
  std::size_t iteration = 0;  // t, starting at 1
  std::size_t removed = 0;
  std::size_t added = 0;
  double lambda_min = 0.0;  // of the set before the swap
  double normalizer = 0.0;  // c_t
  double trace_a = 0.0;
  double b_minus = 0.0;
  double b_plus = 0.0;
  bool fallback = false;
  // Exhaustive scans (instrumented runs only).
  double best_b_minus = std::numeric_limits<double>::quiet_NaN();
  double best_b_plus = std::numeric_limits<double>::quiet_NaN();
};

struct SwapResult {
  WeightedSelection selection;
  std::vector<std::size_t> initial_set;
  std::vector<std::size_t> final_set;
  VectorFamily points{0};  // the (whitened) vectors the loop ran on
  double lambda_min = 0.0;
  double target = 0.0;  // 1 - gamma eps
  double alpha = 0.0;
  double beta = 1.0;
  std::size_t max_iterations = 0;  // T
  std::size_t swaps = 0;
  std::size_t fallbacks = 0;
  bool converged = false;
  std::vector<double> lambda_trace;  // lambda_min before each iteration, then the final one
  std::vector<SwapStep> steps;
  Backend backend = Backend::kExact;
};

struct RegretCheck {
  double lambda_min = 0.0;
  double sum_gap = 0.0;           // sum_t beta (B^-(x_{i_t}) - B^+(x_{j_t}))
  double seed_term = 0.0;         // 2 beta sqrt(d) / alpha
  double initial_term = 0.0;      // (beta - 1) <Z_0, u u'> for the bottom eigenvector u
  double bound = 0.0;             // -sum_gap - seed_term
  double corrected_bound = 0.0;   // bound - initial_term
  double swap_bound = 0.0;        // swaps * eps / (beta n) - 2 eps
  bool holds = false;             // lambda_min >= bound
  bool corrected_holds = false;   // lambda_min >= corrected_bound
};

namespace detail {

inline SquareMatrix set_gram(const VectorFamily &x, const std::vector<bool> &in_set) {
  const auto d = static_cast<Eigen::Index>(x.dim());
  SquareMatrix z = SquareMatrix::Zero(d, d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (in_set[i]) z.noalias() += x[i] * x[i].transpose();
  }
  return (z + z.transpose()) / 2.0;
}

inline void check_swap_input(const VectorFamily &x, std::span<const double> pi,
                             const SwapOptions &opt) {
  if (x.empty() || x.dim() == 0) throw PreconditionViolation("empty family");
  if (pi.size() != x.size()) throw DimensionMismatch("pi length differs from family size");
  if (opt.count == 0 || opt.count > x.size()) throw ConfigError("need 1 <= n <= m");
  if (!(opt.gamma >= 3.0)) throw ConfigError("violated gamma >= 3");
  if (!(opt.epsilon > 0.0 && opt.epsilon <= 1.0 / opt.gamma)) {
    throw ConfigError("violated 0 < eps <= 1/gamma");
  }
  const bool exact = opt.backend == Backend::kExact;
  if (!(opt.c > 1.0 / (opt.gamma - 1.0) && (exact ? opt.c <= 1.0 : opt.c < 1.0))) {
    throw ConfigError(std::string("violated 1/(gamma - 1) < c ") + (exact ? "<=" : "<") + " 1");
  }
  check_backend_window(opt.backend, opt.c, opt.tau);
  double mass = 0.0;
  for (double p : pi) {
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionViolation("pi must lie in [0, 1]");
    mass += p;
  }
  const double n = static_cast<double>(opt.count);
  if (mass > n * (1.0 + 1e-12)) {
    throw PreconditionViolation("violated |pi|_1 <= n (|pi|_1 = " + std::to_string(mass) + ")");
  }
  if (opt.enforce_size_condition) {
    const double need = expdesign_min_size(x.dim(), opt.epsilon, opt.gamma, 1.0 / opt.c);
    if (n < need) {
      throw ConfigError("violated n >= 6 d / eps^2 / (gamma - 1 - 1/c) = " +
                        std::to_string(need) + " (n = " + std::to_string(opt.count) + ")");
    }
  }
}

/// Exact removal: argmin B^- over eligible members, ties to the smallest index.
inline std::optional<std::pair<std::size_t, double>> best_removal(
    const VectorFamily &x, const std::vector<bool> &in_set, const DesignMatrices &dm,
    double alpha, double beta) {
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!in_set[i]) continue;
    const auto s = b_scores(dm.a, dm.a_half, x[i], alpha, beta);
    if (s.minus && (!best || *s.minus < best->second)) best = std::make_pair(i, *s.minus);
  }
  return best;
}

/// argmax B^+ over the complement, ties to the smallest index.
inline std::optional<std::pair<std::size_t, double>> best_insertion(
    const VectorFamily &x, const std::vector<bool> &in_set, const DesignMatrices &dm,
    double alpha, double beta) {
  std::optional<std::pair<std::size_t, double>> best;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (in_set[i]) continue;
    const double p = b_scores(dm.a, dm.a_half, x[i], alpha, beta).plus;
    if (!best || p > best->second) best = std::make_pair(i, p);
  }
  return best;
}

inline Vector flatten_outer(const Vector &v) {
  const SquareMatrix outer = v * v.transpose();
  return Eigen::Map<const Vector>(outer.data(), outer.size());
}

}  // namespace detail

/// Swap rounding of a fractional design pi to an n-subset with
/// lambda_min(sum_{i in S} x_i x_i') > 1 - gamma eps.
inline SwapResult swap_round(const VectorFamily &input, std::span<const double> pi,
                             const SwapOptions &opt) {
  detail::check_swap_input(input, pi, opt);
  SwapResult r;
  r.backend = opt.backend;
  r.points = opt.whiten_input ? whiten(input, pi) : input;
  const VectorFamily &x = r.points;
  {
    const auto d = static_cast<Eigen::Index>(x.dim());
    SquareMatrix g = SquareMatrix::Zero(d, d);
    for (std::size_t i = 0; i < x.size(); ++i) g.noalias() += pi[i] * x[i] * x[i].transpose();
    if ((g - SquareMatrix::Identity(d, d)).norm() > opt.isotropy_tolerance) {
      throw IsotropyViolation("sum_i pi_i x_i x_i' differs from I (use whitening)");
    }
  }
  const std::size_t m = x.size();
  const std::size_t n = opt.count;
  const double d = static_cast<double>(x.dim());
  r.beta = 1.0 / opt.c;
  r.alpha = std::sqrt(d) * r.beta / opt.epsilon;
  r.target = 1.0 - opt.gamma * opt.epsilon;
  r.max_iterations = opt.iteration_limit.value_or(
      static_cast<std::size_t>(std::ceil(r.beta * static_cast<double>(n) / opt.epsilon)));

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pi[a] > pi[b]; });
  std::vector<bool> in_set(m, false);
  for (std::size_t k = 0; k < n; ++k) in_set[order[k]] = true;
  for (std::size_t i = 0; i < m; ++i) {
    if (in_set[i]) r.initial_set.push_back(i);
  }

  std::optional<AdaptiveInnerProductEstimator> aipe;
  std::optional<RobustMinIpIndex> afn;
  if (opt.backend == Backend::kAipe) {
    AdeParams p = opt.aipe;
    p.epsilon = aipe_epsilon(opt.c, opt.tau);
    p.delta = opt.delta;
    std::vector<Vector> flat;
    flat.reserve(m);
    for (std::size_t i = 0; i < m; ++i) flat.push_back(detail::flatten_outer(x[i]));
    aipe.emplace(flat, p, opt.seed);
    for (std::size_t i = 0; i < m; ++i) {
      if (!in_set[i]) aipe->erase(i);
    }
  } else if (opt.backend == Backend::kAfn) {
    MinIpParams p = opt.afn;
    p.c = opt.c;
    p.tau = opt.tau;
    p.delta = opt.delta;
    afn.emplace(RobustMinIpIndex::over_outer_products(x, p, opt.seed));
    for (std::size_t i = 0; i < m; ++i) {
      if (!in_set[i]) afn->erase(i);
    }
  }
  RngState rng(derive_seed(opt.seed, 0x6564));
  const double removal_target = (1.0 - opt.epsilon) / (r.beta * static_cast<double>(n));

  SquareMatrix z = detail::set_gram(x, in_set);
  for (std::size_t t = 1;; ++t) {
    const EigenDecomposition eig = eigen_sym(z);
    const double lmin = eig.values[0];
    r.lambda_trace.push_back(lmin);
    if (lmin > r.target + opt.exit_tolerance) {
      r.converged = true;
      break;
    }
    if (t > r.max_iterations) break;
    if (n == m) throw PreconditionViolation("no index outside the current set");

    const DesignMatrices dm = design_matrices(z, r.alpha);
    SwapStep step;
    step.iteration = t;
    step.lambda_min = lmin;
    step.normalizer = dm.c;
    step.trace_a = dm.a.trace();

    std::optional<std::pair<std::size_t, double>> removal;
    if (opt.backend != Backend::kExact) {
      const SquareMatrix q = swap_query_matrix(dm.a, dm.a_half, n, opt.epsilon, r.alpha, r.beta);
      const SquareMatrix scaled = opt.tau * q;
      std::optional<std::size_t> cand;
      if (aipe) {
        cand = aipe->query_min(Eigen::Map<const Vector>(scaled.data(), scaled.size()), rng).id;
      } else if (auto e = afn->query_candidate(scaled, rng)) {
        cand = e->id;
      }
      if (cand && in_set[*cand]) {
        const auto s = b_scores(dm.a, dm.a_half, x[*cand], r.alpha, r.beta);
        if (s.minus && *s.minus <= removal_target) removal = std::make_pair(*cand, *s.minus);
      }
      if (!removal) {
        ++r.fallbacks;
        step.fallback = true;
      }
    }
    const auto exact_removal =
        (opt.instrument || !removal) ? detail::best_removal(x, in_set, dm, r.alpha, r.beta)
                                     : std::nullopt;
    if (!removal) removal = exact_removal;
    if (!removal) {
      throw NoEligibleRemoval("no member has beta - 2 alpha <A^{1/2}, x x'> > 0 at iteration " +
                              std::to_string(t));
    }
    const auto insertion = detail::best_insertion(x, in_set, dm, r.alpha, r.beta);
    if (exact_removal) step.best_b_minus = exact_removal->second;
    step.best_b_plus = insertion->second;

    step.removed = removal->first;
    step.b_minus = removal->second;
    step.added = insertion->first;
    step.b_plus = insertion->second;
    in_set[step.removed] = false;
    in_set[step.added] = true;
    if (aipe) {
      aipe->erase(step.removed);
      aipe->insert(step.added, detail::flatten_outer(x[step.added]));
    }
    if (afn) {
      afn->erase(step.removed);
      afn->insert(step.added, x[step.added]);
    }
    z.noalias() += x[step.added] * x[step.added].transpose();
    z.noalias() -= x[step.removed] * x[step.removed].transpose();
    z = (z + z.transpose()) / 2.0;
    r.steps.push_back(step);
    ++r.swaps;
  }

  // Recompute from scratch so drift in the rank-one updates cannot leak out.
  r.lambda_min = eigen_sym(detail::set_gram(x, in_set)).values[0];
  r.lambda_trace.back() = r.lambda_min;
  for (std::size_t i = 0; i < m; ++i) {
    if (in_set[i]) {
      r.final_set.push_back(i);
      r.selection.add(i, 1.0);
    }
  }
  if (!r.converged) {
    throw IterationExhausted("no lambda exit after T = " + std::to_string(r.max_iterations) +
                             " iterations (lambda_min " + std::to_string(r.lambda_min) +
                             ", target " + std::to_string(r.target) + ")");
  }
  return r;
}

/// Evaluates the regret chain lambda_min(Z_T) >= -sum beta (B^- - B^+) - 2 beta sqrt(d)/alpha
/// on a finished run, plus the variant that keeps the (beta - 1) <Z_0, U> term.
inline RegretCheck check_regret(const SwapResult &r, double epsilon) {
  RegretCheck out;
  const VectorFamily &x = r.points;
  std::vector<bool> in_set(x.size(), false);
  for (std::size_t i : r.final_set) in_set[i] = true;
  const EigenDecomposition fin = eigen_sym(detail::set_gram(x, in_set));
  out.lambda_min = fin.values[0];
  const Vector u = fin.vectors.col(0);
  std::fill(in_set.begin(), in_set.end(), false);
  for (std::size_t i : r.initial_set) in_set[i] = true;
  out.initial_term = (r.beta - 1.0) * quadratic_form(u, detail::set_gram(x, in_set));
  for (const auto &s : r.steps) out.sum_gap += r.beta * (s.b_minus - s.b_plus);
  out.seed_term = 2.0 * r.beta * std::sqrt(static_cast<double>(x.dim())) / r.alpha;
  out.bound = -out.sum_gap - out.seed_term;
  out.corrected_bound = out.bound - out.initial_term;
  const double n = static_cast<double>(r.initial_set.size());
  out.swap_bound = static_cast<double>(r.swaps) * epsilon / (r.beta * n) - 2.0 * epsilon;
  out.holds = out.lambda_min >= out.bound - 1e-9;
  out.corrected_holds = out.lambda_min >= out.corrected_bound - 1e-9;
  return out;
}

}  // namespace sparsekit
