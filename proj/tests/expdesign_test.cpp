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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sparsekit/expdesign.hpp"

using namespace sparsekit;

namespace {

// Gaussian points; with `collinear`, the first n sit on the first axis so the
// top-pi start set (ties go to the smallest index) is rank deficient.
VectorFamily design_points(std::size_t m, std::size_t n, int d, std::uint64_t seed,
                           bool collinear) {
  std::mt19937_64 rng(seed);
  VectorFamily f(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < m; ++i) {
    Vector v = oracle::random_vector(rng, d);
    if (collinear && i < n) v.tail(d - 1).setZero();
    f.add(v);
  }
  return f;
}

SwapOptions feasible_options(std::size_t n, double eps, double c, std::uint64_t seed) {
  SwapOptions o;
  o.count = n;
  o.epsilon = eps;
  o.gamma = 3.0;
  o.c = c;
  o.seed = seed;
  o.whiten_input = true;
  return o;
}

std::size_t feasible_size(std::size_t d, double eps, double c) {
  return static_cast<std::size_t>(std::ceil(expdesign_min_size(d, eps, 3.0, 1.0 / c)));
}

double set_lambda_min(const VectorFamily &x, const std::vector<std::size_t> &set) {
  SquareMatrix z = SquareMatrix::Zero(x.dim(), x.dim());
  for (std::size_t i : set) z += x[i] * x[i].transpose();
  return oracle::eigenvalues(z).front();
}

// A = (cI + alpha Z)^{-2} via the Jacobi oracle.
std::pair<SquareMatrix, SquareMatrix> oracle_design(const SquareMatrix &z, double alpha,
                                                    double c) {
  auto [vals, vecs] = oracle::jacobi_eigen(oracle::to_dense(z));
  const int d = static_cast<int>(vals.size());
  oracle::Dense a(d, std::vector<double>(d, 0.0));
  oracle::Dense h = a;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        const double g = 1.0 / (c + alpha * vals[k]);
        a[i][j] += vecs[i][k] * vecs[j][k] * g * g;
        h[i][j] += vecs[i][k] * vecs[j][k] * g;
      }
    }
  }
  return {oracle::from_dense(a), oracle::from_dense(h)};
}

void expect_witnesses(const SwapResult &r, double eps) {
  const double n = static_cast<double>(r.initial_set.size());
  for (const auto &s : r.steps) {
    EXPECT_LE(s.best_b_minus, (1.0 - eps) / (r.beta * n)) << s.iteration;
    EXPECT_GE(s.best_b_plus, 1.0 / (r.beta * n)) << s.iteration;
    EXPECT_LE(s.b_minus - s.b_plus, -eps / (r.beta * n)) << s.iteration;
    EXPECT_NEAR(s.trace_a, 1.0, 1e-8);
  }
}

}  // namespace

TEST(FindCt, ClosedForms) {
  EXPECT_NEAR(find_ct(SquareMatrix::Identity(4, 4), 1.0), 1.0, 1e-10);
  EXPECT_NEAR(find_ct(SquareMatrix::Zero(4, 4), 1.0), 2.0, 1e-10);
  EXPECT_NEAR(find_ct(SquareMatrix::Zero(9, 9), 5.0), 3.0, 1e-10);
}

TEST(FindCt, RandomPsdResidual) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 6;
    const SquareMatrix b = oracle::random_symmetric(rng, d);
    const SquareMatrix z = b * b.transpose() * (trial % 2 == 0 ? 1.0 : 1e-3);
    const double alpha = 0.1 + trial;
    const DesignMatrices dm = design_matrices(z, alpha);
    EXPECT_DOUBLE_EQ(dm.c, find_ct(z, alpha));
    EXPECT_GT(dm.c, -alpha * oracle::eigenvalues(z).front());
    const auto [a, h] = oracle_design(z, alpha, dm.c);
    EXPECT_NEAR(a.trace(), 1.0, 1e-10);
    EXPECT_LT(oracle::frobenius_distance(a, dm.a), 1e-10);
    EXPECT_LT(oracle::frobenius_distance(h * h, dm.a), 1e-10);
  }
}

TEST(FindCt, RankDeficientAllowsNegativeNormalizer) {
  // Z = 10 e1 e1', alpha = 1: c solves c^-2 + (c + 10)^-2 = 1 with c > 0 ...
  SquareMatrix z = SquareMatrix::Zero(2, 2);
  z(0, 0) = 10.0;
  double c = find_ct(z, 1.0);
  EXPECT_NEAR(1.0 / (c * c) + 1.0 / ((c + 10) * (c + 10)), 1.0, 1e-10);
  // ... and for Z = 10 I the ray starts at -10.
  c = find_ct(10.0 * SquareMatrix::Identity(2, 2), 1.0);
  EXPECT_NEAR(c, std::sqrt(2.0) - 10.0, 1e-10);
}

TEST(BScores, Examples) {
  const SquareMatrix a = SquareMatrix::Identity(4, 4) / 4.0;
  const SquareMatrix h = SquareMatrix::Identity(4, 4) / 2.0;
  Vector e1 = Vector::Zero(4);
  e1[0] = 1.0;
  const BScores s = b_scores(a, h, e1, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(s.plus, 0.125);
  EXPECT_FALSE(s.minus.has_value());
  const BScores z = b_scores(a, h, Vector::Zero(4), 1.0, 1.0);
  EXPECT_EQ(z.plus, 0.0);
  ASSERT_TRUE(z.minus.has_value());
  EXPECT_EQ(*z.minus, 0.0);
}

TEST(BScores, AlgebraicIdentity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 5;
    const SquareMatrix b = oracle::random_symmetric(rng, d);
    const DesignMatrices dm = design_matrices(b * b.transpose(), 1.0 + trial % 7);
    const Vector x = oracle::random_vector(rng, d);
    const double alpha = 0.05 * (1 + trial % 9);
    const double beta = 1.0 + 0.1 * (trial % 4);
    const BScores s = b_scores(dm.a, dm.a_half, x, alpha, beta);
    const double ax = x.dot(dm.a * x);
    const double hx = x.dot(dm.a_half * x);
    EXPECT_NEAR(s.plus * (beta + 2 * alpha * hx), ax, 1e-12 * std::max(1.0, ax));
    EXPECT_EQ(s.minus.has_value(), beta - 2 * alpha * hx > 0);
    if (s.minus) EXPECT_NEAR(*s.minus * (beta - 2 * alpha * hx), ax, 1e-12 * std::max(1.0, ax));
  }
}

TEST(SwapQuery, EquivalenceWithRemovalTarget) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int eligible = 0;
  int below = 0;
  while (eligible < 200) {
    const int d = 2 + eligible % 4;
    const SquareMatrix b = oracle::random_symmetric(rng, d);
    const DesignMatrices dm = design_matrices(b * b.transpose(), 1.0 + 3 * u(rng));
    const std::size_t n = 1 + static_cast<std::size_t>(20 * u(rng));
    const double eps = 0.05 + 0.3 * u(rng);
    const double alpha = 0.5 * u(rng);
    const double beta = 1.0 + u(rng);
    const Vector x = oracle::random_vector(rng, d) * (0.2 + u(rng));
    const BScores s = b_scores(dm.a, dm.a_half, x, alpha, beta);
    if (!s.minus) continue;
    ++eligible;
    const SquareMatrix q = swap_query_matrix(dm.a, dm.a_half, n, eps, alpha, beta);
    EXPECT_LT((q - q.transpose()).norm(), 1e-15);
    const bool lhs = x.dot(q * x) <= beta;
    const bool rhs = *s.minus <= (1 - eps) / (beta * static_cast<double>(n));
    EXPECT_EQ(lhs, rhs);
    below += lhs ? 1 : 0;
  }
  EXPECT_GT(below, 0);
  EXPECT_LT(below, 200);
}

TEST(SwapQuery, DiagonalClosedForm) {
  SquareMatrix a = SquareMatrix::Zero(3, 3);
  a.diagonal() << 0.5, 0.3, 0.2;
  const SquareMatrix h = a.cwiseSqrt();
  const SquareMatrix q = swap_query_matrix(a, h, 4, 0.5, 0.25, 2.0);
  Vector e2 = Vector::Zero(3);
  e2[1] = 1.0;
  EXPECT_NEAR(e2.dot(q * e2), 2.0 * 4 / 0.5 * 0.3 + 0.5 * std::sqrt(0.3), 1e-15);
}

TEST(SwapRound, FullSetNeedsNoSwaps) {
  std::mt19937_64 rng(3);
  const VectorFamily x = oracle::random_isotropic(rng, 12, 3);
  const std::vector<double> pi(12, 1.0);
  SwapOptions o = feasible_options(12, 1.0 / 3.0, 0.9, 1);
  o.enforce_size_condition = false;
  const SwapResult r = swap_round(x, pi, o);
  EXPECT_EQ(r.swaps, 0u);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.lambda_min, 1.0, 1e-9);
  EXPECT_EQ(r.final_set.size(), 12u);
}

TEST(SwapRound, SmallInstanceWithoutSizeCondition) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const VectorFamily x = design_points(8, 6, 2, seed, true);
    const std::vector<double> pi(8, 0.75);
    SwapOptions o = feasible_options(6, 1.0 / 3.0, 1.0, seed);
    o.enforce_size_condition = false;
    const SwapResult r = swap_round(x, pi, o);
    ASSERT_TRUE(r.converged);
    EXPECT_GE(r.swaps, 1u);
    EXPECT_GE(set_lambda_min(r.points, r.final_set), 0.0);
    for (const auto &s : r.steps) {
      EXPECT_LE(s.b_minus - s.b_plus, -(1.0 / 3.0) / (r.beta * 6)) << seed;
    }
  }
}

TEST(SwapRound, FeasibleFixturesExitWithWitnesses) {
  for (const double eps : {1.0 / 3.0, 0.1}) {
    for (const std::size_t d : {std::size_t{2}, std::size_t{3}}) {
      if (eps < 0.2 && d == 3) continue;  // keeps the run short
      const std::size_t n = feasible_size(d, eps, 0.9);
      const VectorFamily x = design_points(2 * n, n, static_cast<int>(d), 7 + d, true);
      const std::vector<double> pi(2 * n, 0.5);
      const SwapResult r = swap_round(x, pi, feasible_options(n, eps, 0.9, 1));
      ASSERT_TRUE(r.converged);
      EXPECT_GT(r.swaps, 0u);
      EXPECT_LE(r.swaps, r.max_iterations);
      EXPECT_GE(set_lambda_min(r.points, r.final_set), 1.0 - 3.0 * eps);
      EXPECT_EQ(r.final_set.size(), n);
      expect_witnesses(r, eps);
    }
  }
}

TEST(SwapRound, SwapsMoveAcrossTheSet) {
  const std::size_t n = feasible_size(2, 0.1, 0.9);
  const VectorFamily x = design_points(2 * n, n, 2, 3, true);
  const std::vector<double> pi(2 * n, 0.5);
  const SwapResult r = swap_round(x, pi, feasible_options(n, 0.1, 0.9, 1));
  std::vector<bool> in(2 * n, false);
  for (std::size_t i : r.initial_set) in[i] = true;
  for (const auto &s : r.steps) {
    EXPECT_TRUE(in[s.removed]);
    EXPECT_FALSE(in[s.added]);
    in[s.removed] = false;
    in[s.added] = true;
  }
  std::vector<std::size_t> replay;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i]) replay.push_back(i);
  }
  EXPECT_EQ(replay, r.final_set);
}

TEST(SwapRound, RegretChainHolds) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const std::size_t n = feasible_size(2, 0.1, 0.9);
    const VectorFamily x = design_points(2 * n, n, 2, seed, true);
    const std::vector<double> pi(2 * n, 0.5);
    const SwapResult r = swap_round(x, pi, feasible_options(n, 0.1, 0.9, seed));
    const RegretCheck rc = check_regret(r, 0.1);
    EXPECT_TRUE(rc.holds) << rc.lambda_min << " < " << rc.bound;
    EXPECT_TRUE(rc.corrected_holds);
    EXPECT_GE(rc.bound, rc.swap_bound - 1e-12);
    EXPECT_NEAR(rc.seed_term, 2 * 0.1, 1e-12);
  }
}

TEST(SwapRound, BackendsAgreeOnTheExitCondition) {
  const std::size_t n = feasible_size(2, 1.0 / 3.0, 0.9);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const VectorFamily x = design_points(2 * n, n, 2, 20 + seed, true);
    const std::vector<double> pi(2 * n, 0.5);
    SwapOptions exact = feasible_options(n, 1.0 / 3.0, 0.9, seed);
    SwapOptions aipe = exact;
    aipe.backend = Backend::kAipe;
    aipe.tau = 0.8;
    SwapOptions afn = exact;
    afn.backend = Backend::kAfn;
    afn.tau = 0.8999;
    afn.afn.sketch_rows = 32;
    afn.afn.sketch_count = 10;
    afn.afn.replicas = 2;
    for (const SwapOptions &o : {exact, aipe, afn}) {
      const SwapResult r = swap_round(x, pi, o);
      ASSERT_TRUE(r.converged) << to_string(o.backend);
      EXPECT_GE(set_lambda_min(r.points, r.final_set), 0.0) << to_string(o.backend);
      expect_witnesses(r, 1.0 / 3.0);
      RecordProperty(to_string(o.backend) + "_fallbacks", static_cast<int>(r.fallbacks));
    }
  }
}

TEST(SwapRound, ApproximateRemovalsAreVerified) {
  const std::size_t n = feasible_size(2, 0.1, 0.9);
  const VectorFamily x = design_points(2 * n, n, 2, 4, true);
  const std::vector<double> pi(2 * n, 0.5);
  SwapOptions o = feasible_options(n, 0.1, 0.9, 4);
  o.backend = Backend::kAipe;
  o.tau = 0.8;
  const SwapResult r = swap_round(x, pi, o);
  ASSERT_TRUE(r.converged);
  EXPECT_GE(r.lambda_min, 0.7);
  for (const auto &s : r.steps) EXPECT_LE(s.b_minus, 0.9 / (r.beta * n));
}

TEST(SwapRound, Errors) {
  const VectorFamily x = design_points(40, 20, 2, 1, true);
  const std::vector<double> pi(40, 0.5);
  SwapOptions o = feasible_options(20, 1.0 / 3.0, 0.9, 1);
  EXPECT_THROW(swap_round(x, pi, o), ConfigError);  // n-condition
  o.enforce_size_condition = false;
  o.gamma = 2.5;
  EXPECT_THROW(swap_round(x, pi, o), ConfigError);
  o.gamma = 3.0;
  o.epsilon = 0.5;
  EXPECT_THROW(swap_round(x, pi, o), ConfigError);
  o.epsilon = 1.0 / 3.0;
  o.c = 0.4;
  EXPECT_THROW(swap_round(x, pi, o), ConfigError);
  o.c = 0.9;
  o.backend = Backend::kAipe;
  o.tau = 0.9;
  EXPECT_THROW(swap_round(x, pi, o), ConfigError);  // c = tau
  o.backend = Backend::kExact;
  o.whiten_input = false;
  EXPECT_THROW(swap_round(x, pi, o), IsotropyViolation);
  o.whiten_input = true;
  const std::vector<double> heavy(40, 0.6);
  EXPECT_THROW(swap_round(x, heavy, o), PreconditionViolation);  // |pi|_1 > n
}

TEST(SwapRound, IterationExhaustedReportsLambda) {
  const std::size_t n = feasible_size(2, 0.1, 0.9);
  const VectorFamily x = design_points(2 * n, n, 2, 3, true);
  const std::vector<double> pi(2 * n, 0.5);
  SwapOptions o = feasible_options(n, 0.1, 0.9, 1);
  o.iteration_limit = 5;
  try {
    (void)swap_round(x, pi, o);
    FAIL() << "expected IterationExhausted";
  } catch (const IterationExhausted &e) {
    EXPECT_NE(std::string(e.what()).find("lambda_min"), std::string::npos);
  }
}

TEST(SwapRound, NoEligibleRemoval) {
  // Small n and eps make alpha so large that every member fails
  // beta - 2 alpha <A^{1/2}, x x'> > 0.
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  VectorFamily x(2);
  for (int i = 0; i < 8; ++i) x.add(Vector{{g(rng), g(rng)}});
  const std::vector<double> pi(8, 0.75);
  SwapOptions o = feasible_options(6, 0.05, 1.0, 1);
  o.enforce_size_condition = false;
  EXPECT_THROW(swap_round(x, pi, o), NoEligibleRemoval);
}
