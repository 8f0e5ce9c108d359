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
#include <Eigen/Sparse>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsekit/errors.hpp"
#include "sparsekit/linalg.hpp"

namespace sparsekit {

struct SearchResult {
  std::size_t index = 0;
  std::size_t inner_products = 0;
  bool numerical_warning = false;
};

namespace detail {

/// Binary tree over leaves 0..m-1 split at range midpoints; every node stores
/// the sum of the payloads in its range.
template <class Payload>
class RangeSumTree {
 public:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  struct Node {
    std::size_t lo = 0;
    std::size_t hi = 0;
    std::size_t left = kNone;
    std::size_t right = kNone;
    std::size_t parent = kNone;
    Payload sum;

    bool is_leaf() const noexcept { return left == kNone; }
  };

  RangeSumTree() = default;

  explicit RangeSumTree(std::vector<Payload> leaves) {
    if (leaves.empty()) throw PreconditionViolation("search tree needs m >= 1");
    leaf_node_.assign(leaves.size(), kNone);
    nodes_.reserve(2 * leaves.size());
    build(leaves, 0, leaves.size() - 1, kNone);
  }

  std::size_t leaf_count() const noexcept { return leaf_node_.size(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  const Node &node(std::size_t k) const { return nodes_.at(k); }
  const Node &root() const { return nodes_.front(); }

  std::size_t depth() const noexcept { return depth_; }

  const Payload &leaf(std::size_t i) const {
    return nodes_[leaf_node_.at(i)].sum;
  }

  /// Replaces leaf i and recomputes the sums on its root path.
  void set_leaf(std::size_t i, Payload value) {
    std::size_t k = leaf_node_.at(i);
    nodes_[k].sum = std::move(value);
    for (k = nodes_[k].parent; k != kNone; k = nodes_[k].parent) {
      nodes_[k].sum = Payload(nodes_[nodes_[k].left].sum + nodes_[nodes_[k].right].sum);
    }
  }

  struct Descent {
    std::size_t leaf = 0;
    double leaf_value = 0.0;
    double root_value = 0.0;
  };

  /// Root-to-leaf descent toward a node with positive inner product.
  /// Positive left children win ties; a stuck node is an error only when the
  /// root sum is nonpositive.
  template <class InnerProduct>
  Descent descend(InnerProduct &&inner, SearchResult &stats) const {
    const double root_value = inner(root().sum);
    ++stats.inner_products;
    double value = root_value;
    std::size_t k = 0;
    while (!nodes_[k].is_leaf()) {
      const Node &n = nodes_[k];
      const double left = inner(nodes_[n.left].sum);
      ++stats.inner_products;
      if (left > 0.0) {
        k = n.left;
        value = left;
        continue;
      }
      const double right = inner(nodes_[n.right].sum);
      ++stats.inner_products;
      if (right > 0.0) {
        k = n.right;
        value = right;
        continue;
      }
      if (!(root_value > 0.0)) throw_no_positive(root_value);
      stats.numerical_warning = true;
      k = right > left ? n.right : n.left;
      value = std::max(left, right);
    }
    return {nodes_[k].lo, value, root_value};
  }

  /// Error for a leaf that failed the strict check.
  [[noreturn]] static void fail_leaf(std::size_t leaf, double root_value) {
    if (!(root_value > 0.0)) throw_no_positive(root_value);
    throw NumericalWarning("leaf " + std::to_string(leaf) +
                           " failed the strict positivity check");
  }

 private:
  [[noreturn]] static void throw_no_positive(double root_value) {
    throw NoPositiveEntry("no positive entry and total inner product " +
                          std::to_string(root_value) + " is not positive");
  }

  std::size_t build(std::vector<Payload> &leaves, std::size_t lo,
                    std::size_t hi, std::size_t parent, std::size_t level = 0) {
    const std::size_t k = nodes_.size();
    nodes_.emplace_back();
    nodes_[k].lo = lo;
    nodes_[k].hi = hi;
    nodes_[k].parent = parent;
    depth_ = std::max(depth_, level);
    if (lo == hi) {
      nodes_[k].sum = std::move(leaves[lo]);
      leaf_node_[lo] = k;
      return k;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t left = build(leaves, lo, mid, k, level + 1);
    const std::size_t right = build(leaves, mid + 1, hi, k, level + 1);
    nodes_[k].left = left;
    nodes_[k].right = right;
    nodes_[k].sum = Payload(nodes_[left].sum + nodes_[right].sum);
    return k;
  }

  std::vector<Node> nodes_;
  std::vector<std::size_t> leaf_node_;
  std::size_t depth_ = 0;
};

}  // namespace detail

/// Positive inner-product search over arbitrary d x d leaf matrices M_i:
/// returns i with <M_i, A> > 0 whenever sum_i <M_i, A> > 0.
class MatrixSearchTree {
 public:
  using Leaf = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  explicit MatrixSearchTree(std::span<const SquareMatrix> leaves)
      : MatrixSearchTree(to_sparse(leaves)) {}

  explicit MatrixSearchTree(std::vector<Leaf> leaves) {
    if (leaves.empty()) throw PreconditionViolation("search tree needs m >= 1");
    dim_ = static_cast<std::size_t>(leaves.front().rows());
    for (const auto &m : leaves) check_shape(m);
    tree_ = detail::RangeSumTree<Leaf>(std::move(leaves));
  }

  /// Leaves v_i v_i^T stored with nnz(v_i)^2 entries.
  static MatrixSearchTree from_outer_products(const VectorFamily &family) {
    std::vector<Leaf> leaves;
    leaves.reserve(family.size());
    const auto d = static_cast<Eigen::Index>(family.dim());
    for (std::size_t i = 0; i < family.size(); ++i) {
      std::vector<Eigen::Triplet<double>> entries;
      const auto support = family.support(i);
      entries.reserve(support.size() * support.size());
      const Vector &v = family[i];
      for (std::size_t a : support) {
        for (std::size_t b : support) {
          const auto ia = static_cast<Eigen::Index>(a);
          const auto ib = static_cast<Eigen::Index>(b);
          entries.emplace_back(ia, ib, v[ia] * v[ib]);
        }
      }
      Leaf leaf(d, d);
      leaf.setFromTriplets(entries.begin(), entries.end());
      leaves.push_back(std::move(leaf));
    }
    return MatrixSearchTree(std::move(leaves));
  }

  std::size_t size() const noexcept { return tree_.leaf_count(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t depth() const noexcept { return tree_.depth(); }
  std::size_t node_count() const noexcept { return tree_.node_count(); }

  std::pair<std::size_t, std::size_t> node_range(std::size_t k) const {
    return {tree_.node(k).lo, tree_.node(k).hi};
  }
  SquareMatrix node_sum(std::size_t k) const {
    return SquareMatrix(tree_.node(k).sum);
  }
  SquareMatrix root_sum() const { return node_sum(0); }

  SearchResult query_positive(const SquareMatrix &a) const {
    if (static_cast<std::size_t>(a.rows()) != dim_ || a.rows() != a.cols()) {
      throw DimensionMismatch("query matrix shape differs from leaf shape");
    }
    SearchResult result;
    const auto descent = tree_.descend(
        [&](const Leaf &s) { return sparse_inner(s, a); }, result);
    if (!(descent.leaf_value > 0.0)) {
      detail::RangeSumTree<Leaf>::fail_leaf(descent.leaf, descent.root_value);
    }
    result.index = descent.leaf;
    return result;
  }

  void update(std::size_t i, const SquareMatrix &m_new) {
    if (i >= size()) {
      throw PreconditionViolation("update index " + std::to_string(i) +
                                  " out of range");
    }
    Leaf leaf = m_new.sparseView();
    check_shape(leaf);
    tree_.set_leaf(i, std::move(leaf));
  }

  /// <S, A> over the stored entries of S.
  static double sparse_inner(const Leaf &s, const SquareMatrix &a) {
    double total = 0.0;
    for (Eigen::Index r = 0; r < s.outerSize(); ++r) {
      for (Leaf::InnerIterator it(s, r); it; ++it) {
        total += it.value() * a(it.row(), it.col());
      }
    }
    return total;
  }

 private:
  static std::vector<Leaf> to_sparse(std::span<const SquareMatrix> leaves) {
    std::vector<Leaf> out;
    out.reserve(leaves.size());
    for (const auto &m : leaves) out.emplace_back(m.sparseView());
    return out;
  }

  void check_shape(const Leaf &m) const {
    if (static_cast<std::size_t>(m.rows()) != dim_ ||
        static_cast<std::size_t>(m.cols()) != dim_) {
      throw DimensionMismatch("leaf matrices must all be " +
                              std::to_string(dim_) + "x" + std::to_string(dim_));
    }
  }

  std::size_t dim_ = 0;
  detail::RangeSumTree<Leaf> tree_;
};

/// Positive search over outer products v_i v_i^T with leaves holding blocks
/// of d consecutive vectors. The input is zero-padded to a multiple of d.
class BatchedVectorSearchTree {
 public:
  explicit BatchedVectorSearchTree(const VectorFamily &family)
      : count_(family.size()), dim_(family.dim()) {
    if (family.empty() || dim_ == 0) {
      throw PreconditionViolation("vector search tree needs a nonempty family");
    }
    const auto d = static_cast<Eigen::Index>(dim_);
    const std::size_t blocks = (count_ + dim_ - 1) / dim_;
    blocks_.reserve(blocks);
    std::vector<SquareMatrix> leaves;
    leaves.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
      Eigen::MatrixXd block = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t c = 0; c < dim_; ++c) {
        const std::size_t i = b * dim_ + c;
        if (i < count_) block.col(static_cast<Eigen::Index>(c)) = family[i];
      }
      leaves.emplace_back(block * block.transpose());
      blocks_.push_back(std::move(block));
    }
    tree_ = detail::RangeSumTree<SquareMatrix>(std::move(leaves));
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t block_count() const noexcept { return blocks_.size(); }
  std::size_t depth() const noexcept { return tree_.depth(); }
  std::size_t node_count() const noexcept { return tree_.node_count(); }

  /// Block range [lo, hi] of node k.
  std::pair<std::size_t, std::size_t> node_range(std::size_t k) const {
    return {tree_.node(k).lo, tree_.node(k).hi};
  }
  const SquareMatrix &node_sum(std::size_t k) const { return tree_.node(k).sum; }
  const SquareMatrix &root_sum() const { return tree_.root().sum; }

  SearchResult query_positive(const SquareMatrix &a) const {
    if (static_cast<std::size_t>(a.rows()) != dim_ || a.rows() != a.cols()) {
      throw DimensionMismatch("query matrix shape differs from vector dimension");
    }
    SearchResult result;
    const auto descent = tree_.descend(
        [&](const SquareMatrix &s) { return frobenius_inner(s, a); }, result);
    const std::size_t block = descent.leaf;
    const Eigen::MatrixXd &v = blocks_[block];
    const Eigen::MatrixXd b = v.transpose() * (a * v);
    for (std::size_t c = 0; c < dim_; ++c) {
      const std::size_t i = block * dim_ + c;
      if (i >= count_) break;
      const auto cc = static_cast<Eigen::Index>(c);
      if (b(cc, cc) > 0.0) {
        result.index = i;
        return result;
      }
    }
    detail::RangeSumTree<SquareMatrix>::fail_leaf(block, descent.root_value);
  }

 private:
  std::size_t count_;
  std::size_t dim_;
  std::vector<Eigen::MatrixXd> blocks_;
  detail::RangeSumTree<SquareMatrix> tree_;
};

/// First index with v_i^T A v_i > 0 by linear scan, or none.
inline std::optional<std::size_t> linear_scan_positive(const VectorFamily &family,
                                                       const SquareMatrix &a) {
  for (std::size_t i = 0; i < family.size(); ++i) {
    if (quadratic_form(family[i], a) > 0.0) return i;
  }
  return std::nullopt;
}

}  // namespace sparsekit
