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

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sparsekit/afn.hpp"

using namespace sparsekit;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

std::vector<SortedKeyList::Entry> to_vector(SortedKeyList::Range r) {
  return {r.begin(), r.end()};
}

void expect_keys_match(const DfnStructure &d, const PointStore &points) {
  for (std::size_t i = 0; i < d.direction_count(); ++i) {
    ASSERT_EQ(d.list(i).size(), points.size());
    for (const auto &[key, id] : d.list(i)) {
      EXPECT_NEAR(key, d.direction(i).dot(points.at(id)), 1e-12);
    }
  }
}

}  // namespace

TEST(SortedKeyList, SmallExamples) {
  std::vector<SortedKeyList::Entry> init{{1.0, 0}, {3.0, 1}};
  SortedKeyList list(init);
  EXPECT_EQ(list.max(), (SortedKeyList::Entry{3.0, 1}));
  EXPECT_EQ(list.min(), (SortedKeyList::Entry{1.0, 0}));
  EXPECT_EQ(to_vector(list.search_leq(2.0)), (std::vector<SortedKeyList::Entry>{{1.0, 0}}));
  EXPECT_EQ(to_vector(list.search_geq(2.0)), (std::vector<SortedKeyList::Entry>{{3.0, 1}}));
  EXPECT_EQ(to_vector(list.search_leq(3.0)).size(), 2u);
  EXPECT_THROW(list.erase(2.0, 0), NotFound);
  SortedKeyList empty;
  EXPECT_THROW(empty.max(), NotFound);
}

TEST(SortedKeyList, RandomOpsAgainstSortedArray) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> key(0, 50);
  std::uniform_int_distribution<int> op(0, 3);
  SortedKeyList list;
  std::vector<SortedKeyList::Entry> ref;
  std::size_t next_id = 0;
  for (int step = 0; step < 10000; ++step) {
    const int o = op(rng);
    const double k = key(rng) / 4.0;
    if (o <= 1 || ref.empty()) {
      list.insert(k, next_id);
      ref.insert(std::upper_bound(ref.begin(), ref.end(), SortedKeyList::Entry{k, next_id}),
                 {k, next_id});
      ++next_id;
    } else if (o == 2) {
      const auto victim = ref[std::uniform_int_distribution<std::size_t>(0, ref.size() - 1)(rng)];
      list.erase(victim.first, victim.second);
      ref.erase(std::find(ref.begin(), ref.end(), victim));
    } else {
      std::vector<SortedKeyList::Entry> leq, geq;
      for (const auto &e : ref) {
        if (e.first <= k) leq.push_back(e);
        if (e.first >= k) geq.push_back(e);
      }
      ASSERT_EQ(to_vector(list.search_leq(k)), leq);
      ASSERT_EQ(to_vector(list.search_geq(k)), geq);
      ASSERT_EQ(list.min(), ref.front());
      ASSERT_EQ(list.max(), ref.back());
    }
    ASSERT_EQ(list.size(), ref.size());
  }
  EXPECT_TRUE(std::is_sorted(list.begin(), list.end()));
}

TEST(Dfn, ThresholdSolvesEquation) {
  for (std::size_t n : {1u, 2u, 10u, 1000u, 1000000u}) {
    const double t = dfn_threshold(n);
    const double lhs = t * t / 2.0 - std::log(t);
    EXPECT_NEAR(lhs, std::log(2.0 * n), 1e-10) << n;
    EXPECT_GE(t, 1.0);
  }
  const double t2 = dfn_threshold(2);
  EXPECT_NEAR(std::exp(t2 * t2 / 2.0) / t2, 4.0, 1e-9);
}

TEST(Dfn, DirectionCountFormula) {
  EXPECT_EQ(dfn_direction_count(1, 2.0, 1.0), 1u);
  const double n = 1000, inv = 0.25;
  const double expected = 3.0 * std::pow(n, inv) * std::pow(std::log(n), (1 - inv) / 2);
  EXPECT_EQ(dfn_direction_count(1000, 2.0, 3.0),
            static_cast<std::size_t>(std::ceil(expected)));
}

TEST(Dfn, BuildSinglePointAndProjections) {
  std::vector<Vector> one{vec2(1.0, -2.0)};
  auto d1 = DfnStructure::build(one, {2.0, 1.0, 0}, 3);
  for (std::size_t i = 0; i < d1.direction_count(); ++i) EXPECT_EQ(d1.list(i).size(), 1u);

  std::mt19937_64 rng(5);
  std::vector<Vector> pts;
  PointStore ref;
  for (int i = 0; i < 60; ++i) {
    pts.push_back(oracle::random_vector(rng, 5));
    ref.emplace(i, pts.back());
  }
  auto d = DfnStructure::build(pts, {1.5, 2.0, 0}, 11);
  expect_keys_match(d, ref);

  std::uniform_int_distribution<int> coin(0, 1);
  std::size_t next = 60;
  for (int step = 0; step < 200; ++step) {
    if (coin(rng) == 0 || ref.size() < 2) {
      Vector p = oracle::random_vector(rng, 5);
      d.insert(next, p);
      ref.emplace(next++, p);
    } else {
      auto it = std::next(ref.begin(), std::uniform_int_distribution<std::size_t>(
                                           0, ref.size() - 1)(rng));
      d.erase(it->first);
      ref.erase(it);
    }
  }
  expect_keys_match(d, ref);
}

TEST(Dfn, InsertDeleteRestoresLists) {
  std::mt19937_64 rng(8);
  std::vector<Vector> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(oracle::random_vector(rng, 3));
  auto d = DfnStructure::build(pts, {2.0, 1.0, 0}, 4);
  std::vector<SortedKeyList> before;
  for (std::size_t i = 0; i < d.direction_count(); ++i) before.push_back(d.list(i));
  Vector p = oracle::random_vector(rng, 3);
  d.insert(99, p);
  for (std::size_t i = 0; i < d.direction_count(); ++i) {
    bool found = false;
    for (const auto &[k, id] : d.list(i)) {
      if (id == 99) {
        found = true;
        EXPECT_NEAR(k, d.direction(i).dot(p), 1e-12);
      }
    }
    EXPECT_TRUE(found);
  }
  d.erase(99);
  for (std::size_t i = 0; i < d.direction_count(); ++i) EXPECT_EQ(d.list(i), before[i]);
  EXPECT_THROW(d.erase(99), NotFound);
}

TEST(Dfn, DeleteOnlyPointEmptiesLists) {
  std::vector<Vector> one{vec2(0.0, 1.0)};
  auto d = DfnStructure::build(one, {2.0, 1.0, 0}, 1);
  d.erase(0);
  for (std::size_t i = 0; i < d.direction_count(); ++i) EXPECT_TRUE(d.list(i).empty());
}

TEST(Dfn, TwoPointQuery) {
  std::vector<Vector> pts{vec2(0, 0), vec2(10, 0)};
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto d = DfnStructure::build(pts, {2.0, 1.0, 0}, seed);
    auto a = d.query(vec2(0, 0), 5.0);
    if (a) {
      ++successes;
      EXPECT_EQ(a->id, 1u);
      EXPECT_GE(a->distance, 2.5);
    }
  }
  EXPECT_GE(successes, 50);
}

TEST(Dfn, AllPointsCloseAlwaysFails) {
  std::mt19937_64 rng(2);
  std::vector<Vector> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(0.1 * oracle::random_unit(rng, 4));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto d = DfnStructure::build(pts, {2.0, 1.0, 0}, seed);
    EXPECT_FALSE(d.query(Vector::Zero(4), 1.0).has_value());
  }
}

TEST(Dfn, SoundnessOnRandomQueries) {
  std::mt19937_64 rng(21);
  std::vector<Vector> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(oracle::random_vector(rng, 6));
  auto d = DfnStructure::build(pts, {1.5, 1.0, 0}, 9);
  for (int trial = 0; trial < 200; ++trial) {
    Vector q = oracle::random_vector(rng, 6);
    const double r = std::uniform_real_distribution<double>(0.5, 6.0)(rng);
    if (auto a = d.query(q, r)) {
      EXPECT_NEAR(a->distance, (pts[a->id] - q).norm(), 1e-12);
      EXPECT_GE(a->distance, r / 1.5);
    }
  }
  EXPECT_THROW(d.query(Vector::Zero(6), 0.0), PreconditionViolation);
}

TEST(Afn, BoxWidth) {
  std::vector<Vector> pts{vec2(0, 0), vec2(1, 2)};
  auto a = AfnStructure::build(pts, {}, 1);
  EXPECT_DOUBLE_EQ(a.boxwidth(), 2.0);
  std::vector<Vector> one{vec2(3, 4)};
  auto s = AfnStructure::build(one, {}, 1);
  EXPECT_DOUBLE_EQ(s.boxwidth(), 0.0);
  auto ans = s.query(vec2(0, 0));
  ASSERT_TRUE(ans.has_value());
  EXPECT_EQ(ans->id, 0u);
  EXPECT_DOUBLE_EQ(ans->distance, 5.0);
}

TEST(Afn, BoxWidthTracksUpdates) {
  std::mt19937_64 rng(4);
  std::vector<Vector> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(oracle::random_vector(rng, 3));
  auto a = AfnStructure::build(pts, {}, 2);
  std::map<std::size_t, Vector> live;
  for (std::size_t i = 0; i < pts.size(); ++i) live.emplace(i, pts[i]);
  auto direct = [&] {
    double bw = 0.0;
    for (int j = 0; j < 3; ++j) {
      double lo = 1e300, hi = -1e300;
      for (const auto &[id, p] : live) {
        lo = std::min(lo, p[j]);
        hi = std::max(hi, p[j]);
      }
      bw = std::max(bw, hi - lo);
    }
    return bw;
  };
  EXPECT_DOUBLE_EQ(a.boxwidth(), direct());
  for (std::size_t id = 0; id < 30; ++id) {
    a.erase(id);
    live.erase(id);
    ASSERT_DOUBLE_EQ(a.boxwidth(), direct());
  }
  Vector far = Vector::Constant(3, 10.0);
  a.insert(500, far);
  live.emplace(500, far);
  EXPECT_DOUBLE_EQ(a.boxwidth(), direct());
  EXPECT_THROW(a.insert(500, far), PreconditionViolation);
  EXPECT_THROW(a.erase(7), NotFound);
}

TEST(Afn, ForcedTwoPointAnswer) {
  std::vector<Vector> pts{vec2(0, 0), vec2(1, 0)};
  AfnParams p;
  p.approximation = 2.0;
  p.precision = 0.1;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = AfnStructure::build(pts, p, seed);
    if (auto ans = a.query(vec2(0, 0))) EXPECT_EQ(ans->id, 1u);
  }
}

TEST(Afn, RandomSphereSuccessAndFactor) {
  std::mt19937_64 rng(33);
  std::vector<Vector> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(oracle::random_unit(rng, 8));
  std::vector<Vector> queries;
  for (int i = 0; i < 50; ++i) queries.push_back(oracle::random_unit(rng, 8));
  AfnParams p;
  p.approximation = 2.0;
  p.precision = 0.1;
  int total = 0, ok = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = AfnStructure::build(pts, p, 1000 + seed);
    for (const auto &q : queries) {
      ++total;
      AfnTrace trace;
      auto ans = a.query(q, &trace);
      if (!ans) continue;
      ++ok;
      const double best = exact_furthest(pts, q).distance;
      EXPECT_GE(ans->distance, best / (p.approximation + p.precision) - 1e-12);
      const double bw = a.boxwidth();
      EXPECT_GE(trace.accepted_radius, bw / 2.0 - 1e-12);
      EXPECT_LE(trace.accepted_radius, std::sqrt(8.0) / (p.approximation - 1.0) * bw + 1e-12);
      if (!trace.far_query) {
        EXPECT_LE(trace.hi / trace.lo, 1.0 + p.precision / p.approximation + 1e-12);
      }
    }
  }
  EXPECT_GE(static_cast<double>(ok) / total, 0.9);
}

TEST(Afn, FarQueryAcceptsAnyPoint) {
  std::mt19937_64 rng(12);
  std::vector<Vector> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(oracle::random_unit(rng, 4));
  AfnParams p;
  p.approximation = 2.0;
  auto a = AfnStructure::build(pts, p, 6);
  const double eps = p.approximation - 1.0;
  Vector q = Vector::Zero(4);
  q[0] = 2.0 * std::sqrt(4.0) / eps * a.boxwidth() + 5.0;
  AfnTrace trace;
  auto ans = a.query(q, &trace);
  ASSERT_TRUE(ans.has_value());
  EXPECT_TRUE(trace.far_query);
  EXPECT_GE(ans->distance * (1.0 + eps), exact_furthest(pts, q).distance);
}

TEST(Afn, AmplificationRaisesSuccessRate) {
  std::mt19937_64 rng(77);
  std::vector<Vector> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(oracle::random_unit(rng, 6));
  std::vector<Vector> queries;
  for (int i = 0; i < 20; ++i) queries.push_back(oracle::random_unit(rng, 6));
  std::vector<double> rates;
  for (std::size_t copies : {1u, 2u, 4u}) {
    int ok = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      AfnParams p;
      p.approximation = 1.2;
      p.copies = copies;
      p.directions = 1;
      auto a = AfnStructure::build(pts, p, 5000 + seed);
      for (const auto &q : queries) {
        ++total;
        ok += a.query(q).has_value() ? 1 : 0;
      }
    }
    rates.push_back(static_cast<double>(ok) / total);
  }
  EXPECT_LT(rates[0], rates[1]);
  EXPECT_LT(rates[1], rates[2]);
}
