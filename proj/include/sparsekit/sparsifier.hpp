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
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"
#include "sparsekit/psearch.hpp"

namespace sparsekit {

enum class SearchKind { kLinearScan, kVectorTree, kMatrixTree };

inline std::string to_string(SearchKind k) {
  switch (k) {
    case SearchKind::kLinearScan: return "linear_scan";
    case SearchKind::kVectorTree: return "vector_tree";
    case SearchKind::kMatrixTree: return "matrix_tree";
  }
  return "unknown";
}

struct BssOptions {
  double epsilon = 0.5;
  double omega = 3.0;
  double isotropy_tolerance = 1e-6;
  bool record_trace = true;
  std::optional<SearchKind> force_search;  // overrides the cost model in the fast variant
};

/// State after one iteration.
struct BssStep {
  std::size_t iteration = 0;
  std::size_t index = 0;
  double c = 0.0;
  double gap = 0.0;        // v_j' (L - U) v_j
  double total_gap = 0.0;  // sum_i v_i' (L - U) v_i
  double upper = 0.0;
  double lower = 0.0;
  double upper_potential = 0.0;  // barrier potentials of the new iterate
  double lower_potential = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  bool fallback = false;
};

struct BssResult {
  WeightedSelection selection;
  SquareMatrix accumulator;  // A_T
  SquareMatrix normalized;   // eps^2 A_T / d = sum_i s_i v_i v_i'
  std::size_t iterations = 0;
  SearchKind search = SearchKind::kLinearScan;
  std::size_t fallbacks = 0;
  std::size_t numerical_warnings = 0;
  double initial_upper_potential = 0.0;
  double initial_lower_potential = 0.0;
  double search_seconds = 0.0;
  std::vector<BssStep> trace;
};

inline std::size_t bss_iterations(std::size_t dim, double epsilon) {
  return static_cast<std::size_t>(std::ceil(static_cast<double>(dim) / (epsilon * epsilon)));
}

/// Vector tree iff m d^{omega-1} <= sum_i nnz(v_i)^2.
inline SearchKind choose_search_tree(const VectorFamily &family, double omega) {
  const double lhs = static_cast<double>(family.size()) *
                     std::pow(static_cast<double>(family.dim()), omega - 1.0);
  return lhs <= static_cast<double>(family.squared_nnz()) ? SearchKind::kVectorTree
                                                          : SearchKind::kMatrixTree;
}

/// Index with the largest v_i' Q v_i, ties to the smallest index.
inline std::pair<std::size_t, double> argmax_quadratic(const VectorFamily &family,
                                                       const SquareMatrix &q) {
  std::size_t best = 0;
  double best_value = quadratic_form(family[0], q);
  for (std::size_t i = 1; i < family.size(); ++i) {
    const double v = quadratic_form(family[i], q);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return {best, best_value};
}

namespace detail {

class PositiveSearcher {
 public:
  PositiveSearcher(const VectorFamily &family, SearchKind kind) : kind_(kind) {
    if (kind == SearchKind::kVectorTree) {
      tree_.emplace<BatchedVectorSearchTree>(family);
    } else if (kind == SearchKind::kMatrixTree) {
      tree_.emplace<MatrixSearchTree>(MatrixSearchTree::from_outer_products(family));
    }
  }

  /// Positive index, or nullopt with `warned` set when the tree gives up.
  std::optional<std::size_t> find(const SquareMatrix &q, bool &warned) const {
    warned = false;
    try {
      return std::visit(
          [&](const auto &t) -> std::optional<std::size_t> {
            if constexpr (std::is_same_v<std::decay_t<decltype(t)>, std::monostate>) {
              return std::nullopt;
            } else {
              const SearchResult r = t.query_positive(q);
              warned = r.numerical_warning;
              return r.index;
            }
          },
          tree_);
    } catch (const NumericalWarning &) {
      warned = true;
    } catch (const NoPositiveEntry &) {
    }
    return std::nullopt;
  }

 private:
  SearchKind kind_;
  std::variant<std::monostate, BatchedVectorSearchTree, MatrixSearchTree> tree_;
};

inline BssResult run_bss(const VectorFamily &family, const BssOptions &opt,
                         double lower_step, SearchKind search) {
  const double eps = opt.epsilon;
  if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("need 0 < epsilon < 1");
  if (family.empty() || family.dim() == 0) {
    throw PreconditionViolation("BSS needs a nonempty family");
  }
  if (!check_isotropy(family, opt.isotropy_tolerance)) {
    throw IsotropyViolation("sum_i v_i v_i' differs from I by more than " +
                            std::to_string(opt.isotropy_tolerance));
  }
  const std::size_t d = family.dim();
  const auto dd = static_cast<double>(d);
  const std::size_t steps = bss_iterations(d, eps);
  const double upper_step = 1.0;

  BssResult result;
  result.search = search;
  result.iterations = steps;
  const auto di = static_cast<Eigen::Index>(d);
  SquareMatrix a = SquareMatrix::Zero(di, di);
  double u = dd / eps;
  double ell = -dd / eps;
  EigenDecomposition eig = eigen_sym(a);
  double upper_potential = barrier_upper(eig, u);
  double lower_potential = barrier_lower(eig, ell);
  result.initial_upper_potential = upper_potential;
  result.initial_lower_potential = lower_potential;

  PositiveSearcher searcher(family, search);
  using Clock = std::chrono::steady_clock;

  for (std::size_t t = 1; t <= steps; ++t) {
    const double u_next = u + upper_step;
    const double ell_next = ell + lower_step;
    const double upper_drop = upper_potential - barrier_upper(eig, u_next);
    const double lower_rise = barrier_lower(eig, ell_next) - lower_potential;
    const SquareMatrix upper_mat =
        spectral_apply(eig, [&](double x) {
          const double g = u_next - x;
          return 1.0 / (g * g) / upper_drop + 1.0 / g;
        });
    const SquareMatrix lower_mat =
        spectral_apply(eig, [&](double x) {
          const double g = x - ell_next;
          return 1.0 / (g * g) / lower_rise - 1.0 / g;
        });
    const SquareMatrix q = lower_mat - upper_mat;
    const SquareMatrix sum = lower_mat + upper_mat;

    const auto start = Clock::now();
    bool fallback = false;
    std::size_t j = 0;
    double gap = 0.0;
    double c = 0.0;
    if (search == SearchKind::kLinearScan) {
      std::tie(j, gap) = argmax_quadratic(family, q);
      c = quadratic_form(family[j], sum) / 2.0;
    } else {
      bool warned = false;
      const auto found = searcher.find(q, warned);
      if (warned) ++result.numerical_warnings;
      if (found) {
        j = *found;
        gap = quadratic_form(family[j], q);
        c = quadratic_form(family[j], sum) / 2.0;
      }
      if (!found || !(gap >= 0.0) || !(c > 0.0)) {
        fallback = true;
        ++result.fallbacks;
        std::tie(j, gap) = argmax_quadratic(family, q);
        c = quadratic_form(family[j], sum) / 2.0;
      }
    }
    result.search_seconds += std::chrono::duration<double>(Clock::now() - start).count();
    if (!(gap >= 0.0)) {
      throw NoWitness("no index with v'(L - U)v >= 0 at iteration " + std::to_string(t) +
                      " (best " + std::to_string(gap) + ")");
    }
    if (!(c > 0.0)) {
      throw NumericalWarning("non-positive step weight at iteration " + std::to_string(t));
    }

    a.noalias() += (1.0 / c) * family[j] * family[j].transpose();
    a = (a + a.transpose()) / 2.0;
    result.selection.add(j, eps * eps / (c * dd));
    u = u_next;
    ell = ell_next;
    eig = eigen_sym(a);
    upper_potential = barrier_upper(eig, u);
    lower_potential = barrier_lower(eig, ell);
    if (opt.record_trace) {
      result.trace.push_back({t, j, c, gap, q.trace(), u, ell, upper_potential,
                              lower_potential, eig.values[0],
                              eig.values[eig.values.size() - 1], fallback});
    }
  }
  result.accumulator = a;
  result.normalized = (eps * eps / dd) * a;
  return result;
}

}  // namespace detail

/// Two-barrier greedy with a full scan: delta_L = 1/(1 + 2 eps).
inline BssResult bss_reference(const VectorFamily &family, BssOptions opt) {
  return detail::run_bss(family, opt, 1.0 / (1.0 + 2.0 * opt.epsilon),
                         SearchKind::kLinearScan);
}

/// Two-barrier greedy driven by positive search: delta_L = 1/(1 + 3 eps).
inline BssResult sparsify_fast(const VectorFamily &family, BssOptions opt) {
  const SearchKind kind = opt.force_search ? *opt.force_search
                                           : choose_search_tree(family, opt.omega);
  return detail::run_bss(family, opt, 1.0 / (1.0 + 3.0 * opt.epsilon), kind);
}

struct SparsifierReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  std::size_t support = 0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  bool pass = false;
};

/// Spectrum of sum_i s_i v_i v_i' against (1 - eps - 2 eps^2, 1 + eps).
inline SparsifierReport verify_sparsifier(const VectorFamily &family,
                                          const WeightedSelection &selection,
                                          double epsilon) {
  const SquareMatrix g = selection.weighted_gram(family);
  const EigenDecomposition eig = eigen_sym(g);
  SparsifierReport r;
  r.lambda_min = eig.values[0];
  r.lambda_max = eig.values[eig.values.size() - 1];
  r.support = selection.support_size();
  r.lower_bound = 1.0 - epsilon - 2.0 * epsilon * epsilon;
  r.upper_bound = 1.0 + epsilon;
  r.pass = r.lambda_min > r.lower_bound && r.lambda_max < r.upper_bound;
  return r;
}

}  // namespace sparsekit
