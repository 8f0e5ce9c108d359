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

// Explicit matrices of the tensor sketches, rebuilt from their public hashes
// and signs, for equivalence checks.

#pragma once

#include <cmath>
#include <cstddef>

#include "sparsekit/sketch.hpp"

namespace sparsekit::oracle {

inline double hadamard(std::size_t a, std::size_t b) {
  return __builtin_parityll(a & b) ? -1.0 : 1.0;
}

/// Explicit b x d^2 matrix of a TensorSRHT from its sampled rows and signs.
inline Eigen::MatrixXd materialize(const TensorSrhtSketch &s) {
  const std::size_t d = s.dim(), b = s.rows();
  Eigen::MatrixXd m(b, d * d);
  for (std::size_t r = 0; r < b; ++r) {
    const auto [ir, jr] = s.samples()[r];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        m(r, i * d + j) = hadamard(ir, i) * s.sign1()[i] * hadamard(jr, j) *
                          s.sign2()[j] / std::sqrt(double(b));
  }
  return m;
}

/// Explicit b x d^2 matrix of a TensorSparse sketch from its hash functions.
inline Eigen::MatrixXd materialize(const TensorSparseSketch &r) {
  const std::size_t d = r.dim(), b = r.rows(), s = r.sparsity(), B = b / s;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(b, d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < s; ++k) {
        const std::size_t row = k * B + (r.bucket(1, i, k) + r.bucket(2, j, k)) % B;
        m(row, i * d + j) += r.sign(1, i, k) * r.sign(2, j, k) / std::sqrt(double(s));
      }
  return m;
}

inline Vector kron(const Vector &u, const Vector &v) {
  Vector x(u.size() * v.size());
  for (Eigen::Index i = 0; i < u.size(); ++i)
    for (Eigen::Index j = 0; j < v.size(); ++j) x[i * v.size() + j] = u[i] * v[j];
  return x;
}


}  // namespace sparsekit::oracle
