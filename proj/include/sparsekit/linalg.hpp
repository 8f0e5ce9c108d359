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
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsekit/errors.hpp"

namespace sparsekit {

using Vector = Eigen::VectorXd;
using SquareMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A sequence of m vectors in R^d. Each vector keeps the list of its nonzero
/// coordinates so nnz-based cost estimates are available.
class VectorFamily {
 public:
  explicit VectorFamily(std::size_t dim = 0) : dim_(dim) {}

  static VectorFamily from_rows(const Eigen::MatrixXd &rows) {
    VectorFamily family(static_cast<std::size_t>(rows.cols()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      family.add(rows.row(i).transpose());
    }
    return family;
  }

  void add(const Vector &v) {
    if (static_cast<std::size_t>(v.size()) != dim_) {
      throw DimensionMismatch("vector of length " + std::to_string(v.size()) +
                              " added to a family of dimension " +
                              std::to_string(dim_));
    }
    std::vector<std::size_t> support;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (v[j] != 0.0) support.push_back(static_cast<std::size_t>(j));
    }
    vectors_.push_back(v);
    supports_.push_back(std::move(support));
  }

  /// Adds a vector given by its nonzero coordinates (duplicates are summed).
  void add_sparse(std::span<const std::size_t> indices,
                  std::span<const double> values) {
    if (indices.size() != values.size()) {
      throw DimensionMismatch("index and value lists differ in length");
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= dim_) {
        throw DimensionMismatch("sparse index " + std::to_string(indices[k]) +
                                " out of range for dimension " +
                                std::to_string(dim_));
      }
      v[static_cast<Eigen::Index>(indices[k])] += values[k];
    }
    add(v);
  }

  std::size_t size() const noexcept { return vectors_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return vectors_.empty(); }

  const Vector &operator[](std::size_t i) const { return vectors_.at(i); }

  std::span<const std::size_t> support(std::size_t i) const {
    return supports_.at(i);
  }
  std::size_t nnz(std::size_t i) const { return supports_.at(i).size(); }

  /// Sum of nnz(v_i)^2, the storage cost of all outer products.
  std::size_t squared_nnz() const {
    std::size_t total = 0;
    for (const auto &s : supports_) total += s.size() * s.size();
    return total;
  }

  Eigen::MatrixXd rows() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(size()),
                        static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)) = vectors_[i].transpose();
    }
    return out;
  }

  /// Sum of v_i v_i^T.
  SquareMatrix gram() const {
    const auto d = static_cast<Eigen::Index>(dim_);
    SquareMatrix g = SquareMatrix::Zero(d, d);
    for (std::size_t i = 0; i < size(); ++i) {
      const auto &v = vectors_[i];
      for (std::size_t a : supports_[i]) {
        for (std::size_t b : supports_[i]) {
          g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
              v[static_cast<Eigen::Index>(a)] * v[static_cast<Eigen::Index>(b)];
        }
      }
    }
    return g;
  }

 private:
  std::size_t dim_;
  std::vector<Vector> vectors_;
  std::vector<std::vector<std::size_t>> supports_;
};

/// Indices with positive weights, kept in index order.
class WeightedSelection {
 public:
  void add(std::size_t index, double weight) {
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw PreconditionViolation("selection weights must be positive");
    }
    weights_[index] += weight;
  }

  std::size_t support_size() const noexcept { return weights_.size(); }
  bool contains(std::size_t index) const { return weights_.contains(index); }
  double weight(std::size_t index) const {
    auto it = weights_.find(index);
    return it == weights_.end() ? 0.0 : it->second;
  }

  std::vector<std::pair<std::size_t, double>> entries() const {
    return {weights_.begin(), weights_.end()};
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    out.reserve(weights_.size());
    for (const auto &[i, w] : weights_) out.push_back(i);
    return out;
  }

  /// Sum of w_i v_i v_i^T over the selection.
  SquareMatrix weighted_gram(const VectorFamily &family) const {
    const auto d = static_cast<Eigen::Index>(family.dim());
    SquareMatrix g = SquareMatrix::Zero(d, d);
    for (const auto &[i, w] : weights_) {
      if (i >= family.size()) {
        throw PreconditionViolation("selection index " + std::to_string(i) +
                                    " out of range");
      }
      g.noalias() += w * family[i] * family[i].transpose();
    }
    return g;
  }

 private:
  std::map<std::size_t, double> weights_;
};

struct EigenDecomposition {
  Vector values;         // ascending
  SquareMatrix vectors;  // orthonormal columns

  SquareMatrix reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
  }
};

struct SpectrumBounds {
  double min = 0.0;
  double max = 0.0;
};

enum class BarrierSide { kUpper, kLower };

inline double quadratic_form(const Vector &v, const SquareMatrix &m) {
  if (m.rows() != m.cols() || v.size() != m.rows()) {
    throw DimensionMismatch("quadratic form of length " +
                            std::to_string(v.size()) + " with a " +
                            std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + " matrix");
  }
  return v.dot(m * v);
}

/// <A, B> = tr(A^T B).
inline double frobenius_inner(const SquareMatrix &a, const SquareMatrix &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("Frobenius inner product of mismatched shapes");
  }
  return a.cwiseProduct(b).sum();
}

inline bool is_symmetric(const SquareMatrix &a) {
  if (a.rows() != a.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      const double scale = std::max(1.0, std::abs(a(i, j)));
      if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale) return false;
    }
  }
  return true;
}

inline EigenDecomposition eigen_sym(const SquareMatrix &a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionMismatch("eigendecomposition needs a nonempty square matrix");
  }
  if (!a.allFinite()) {
    throw PreconditionViolation("matrix has non-finite entries");
  }
  if (!is_symmetric(a)) {
    throw PreconditionViolation("matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalWarning("symmetric eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Q f(Lambda) Q^T, symmetrized.
template <class F>
SquareMatrix spectral_apply(const EigenDecomposition &eig, F &&f) {
  Vector mapped = eig.values.unaryExpr(std::forward<F>(f));
  SquareMatrix out = eig.vectors * mapped.asDiagonal() * eig.vectors.transpose();
  return (out + out.transpose()) / 2.0;
}

namespace detail {

inline double barrier_margin(const EigenDecomposition &eig) {
  const double scale =
      std::max({1.0, std::abs(eig.values[0]),
                std::abs(eig.values[eig.values.size() - 1])});
  return 1e-12 * scale;
}

inline void check_barrier(const EigenDecomposition &eig, double shift,
                          BarrierSide side) {
  const double margin = barrier_margin(eig);
  if (side == BarrierSide::kUpper) {
    const double top = eig.values[eig.values.size() - 1];
    if (!(shift > top + margin)) {
      throw BarrierViolation("upper barrier " + std::to_string(shift) +
                             " not above lambda_max " + std::to_string(top));
    }
  } else {
    const double bottom = eig.values[0];
    if (!(shift < bottom - margin)) {
      throw BarrierViolation("lower barrier " + std::to_string(shift) +
                             " not below lambda_min " + std::to_string(bottom));
    }
  }
}

/// Distance of an eigenvalue to the barrier, positive inside.
inline double barrier_gap(double lambda, double shift, BarrierSide side) {
  return side == BarrierSide::kUpper ? shift - lambda : lambda - shift;
}

}  // namespace detail

/// tr[(u I - A)^{-1}] from a precomputed decomposition.
inline double barrier_upper(const EigenDecomposition &eig, double u) {
  detail::check_barrier(eig, u, BarrierSide::kUpper);
  return (1.0 / (u - eig.values.array())).sum();
}

/// tr[(A - l I)^{-1}] from a precomputed decomposition.
inline double barrier_lower(const EigenDecomposition &eig, double ell) {
  detail::check_barrier(eig, ell, BarrierSide::kLower);
  return (1.0 / (eig.values.array() - ell)).sum();
}

inline double barrier_upper(const SquareMatrix &a, double u) {
  return barrier_upper(eigen_sym(a), u);
}

inline double barrier_lower(const SquareMatrix &a, double ell) {
  return barrier_lower(eigen_sym(a), ell);
}

/// (u I - A)^{-p} for the upper side, (A - l I)^{-p} for the lower side.
inline SquareMatrix shifted_inverse_power(const EigenDecomposition &eig,
                                          double shift, BarrierSide side,
                                          int power) {
  if (power != 1 && power != 2) {
    throw PreconditionViolation("shifted inverse power must be 1 or 2");
  }
  detail::check_barrier(eig, shift, side);
  return spectral_apply(eig, [&](double lambda) {
    const double g = detail::barrier_gap(lambda, shift, side);
    return power == 1 ? 1.0 / g : 1.0 / (g * g);
  });
}

inline SquareMatrix shifted_inverse_power(const SquareMatrix &a, double shift,
                                          BarrierSide side, int power) {
  return shifted_inverse_power(eigen_sym(a), shift, side, power);
}

inline SquareMatrix psd_sqrt(const SquareMatrix &a) {
  const EigenDecomposition eig = eigen_sym(a);
  const double norm = std::max(std::abs(eig.values[0]),
                               std::abs(eig.values[eig.values.size() - 1]));
  if (eig.values[0] < -1e-8 * norm) {
    throw NotPsd("lambda_min " + std::to_string(eig.values[0]) +
                 " is negative");
  }
  return spectral_apply(eig,
                        [](double lambda) { return std::sqrt(std::max(lambda, 0.0)); });
}

inline SpectrumBounds spectrum_bounds(const SquareMatrix &a) {
  const EigenDecomposition eig = eigen_sym(a);
  return {eig.values[0], eig.values[eig.values.size() - 1]};
}

/// Returns rows x_i' = (X^T diag(pi) X)^{-1/2} x_i, so that
/// sum pi_i x_i' x_i'^T = I.
inline VectorFamily whiten(const VectorFamily &x, std::span<const double> pi) {
  if (pi.size() != x.size()) {
    throw DimensionMismatch("weight vector length differs from family size");
  }
  if (x.empty() || x.dim() == 0) {
    throw SingularGram("empty family");
  }
  const auto d = static_cast<Eigen::Index>(x.dim());
  SquareMatrix g = SquareMatrix::Zero(d, d);
  for (std::size_t i = 0; i < x.size(); ++i) {
    g.noalias() += pi[i] * x[i] * x[i].transpose();
  }
  g = (g + g.transpose()) / 2.0;
  const EigenDecomposition eig = eigen_sym(g);
  const double top = eig.values[d - 1];
  if (!(eig.values[0] > 1e-10 * top) || !(top > 0.0)) {
    throw SingularGram("weighted Gram matrix is singular (lambda_min " +
                       std::to_string(eig.values[0]) + ", lambda_max " +
                       std::to_string(top) + ")");
  }
  const SquareMatrix inv_sqrt =
      spectral_apply(eig, [](double lambda) { return 1.0 / std::sqrt(lambda); });
  VectorFamily out(x.dim());
  for (std::size_t i = 0; i < x.size(); ++i) out.add(inv_sqrt * x[i]);
  return out;
}

inline bool check_isotropy(const VectorFamily &v, double tol) {
  const auto d = static_cast<Eigen::Index>(v.dim());
  return (v.gram() - SquareMatrix::Identity(d, d)).norm() <= tol;
}

}  // namespace sparsekit
