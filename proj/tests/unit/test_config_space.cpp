// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "wkam/assignment.hpp"
#include "wkam/config_space.hpp"
#include "wkam/csv.hpp"

namespace wkam {
namespace {

Configuration random_cfg(std::mt19937_64& rng, std::size_t n, std::size_t d, double lo = -2.0,
                         double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Configuration m(n, d);
  for (double& x : m.values()) x = u(rng);
  return m;
}

// Minimum over all N! permutations, computed without the assignment solver.
double brute_force_cost(const std::vector<double>& cost, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + p[i]];
    best = std::min(best, s);
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

TEST(ParticleArray, RejectsBadShapesAndNonFinite) {
  EXPECT_THROW(Configuration(2, 1, std::vector<double>{1.0}), InvalidInput);
  EXPECT_THROW(Configuration(1, 1, std::vector<double>{std::nan("")}), InvalidInput);
  EXPECT_THROW(Configuration::from_rows({{0.0, 1.0}, {2.0}}), InvalidInput);
  EXPECT_THROW(Configuration(0, 1), InvalidInput);
}

TEST(ParticleArray, EmpiricalInnerProduct) {
  const auto a = Configuration::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const auto b = Configuration::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  EXPECT_DOUBLE_EQ(inner(a, b), 0.5 * (1.0 + 4.0));
  EXPECT_DOUBLE_EQ(norm_sq(a), 0.5 * (1 + 4 + 9 + 16));
  const auto mu = mean(a);
  EXPECT_DOUBLE_EQ(mu[0], 2.0);
  EXPECT_DOUBLE_EQ(mu[1], 3.0);
}

TEST(Wrap, Examples) {
  EXPECT_EQ(wrap(Configuration::from_rows({{0.25}})), Configuration::from_rows({{0.25}}));
  EXPECT_EQ(wrap(Configuration::from_rows({{1.75}})), Configuration::from_rows({{0.75}}));
  const auto w = wrap(Configuration::from_rows({{-0.3, 2.0}}));
  EXPECT_NEAR(w(0, 0), 0.7, 1e-15);
  EXPECT_EQ(w(0, 1), 0.0);
}

TEST(Wrap, AlwaysInUnitIntervalAndDiffersByIntegers) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 200; ++t) {
    const auto m = random_cfg(rng, 3, 2, -50.0, 50.0);
    const auto w = wrap(m);
    for (std::size_t k = 0; k < m.size(); ++k) {
      EXPECT_GE(w.values()[k], 0.0);
      EXPECT_LT(w.values()[k], 1.0);
      const double diff = m.values()[k] - w.values()[k];
      EXPECT_NEAR(diff, std::round(diff), 1e-12);
    }
  }
  // Just below zero: floor gives x + 1 which may round to exactly 1.
  const auto tiny = wrap(Configuration::from_rows({{-1e-20}}));
  EXPECT_GE(tiny(0, 0), 0.0);
  EXPECT_LT(tiny(0, 0), 1.0);
}

TEST(TorusSqDist, Examples) {
  const double a[] = {0.1}, b[] = {0.1}, c[] = {0.9};
  EXPECT_EQ(torus_sq_dist(a, b), 0.0);
  EXPECT_NEAR(torus_sq_dist(c, a), 0.04, 1e-15);
  const double x[] = {0.0, 0.5}, y[] = {0.5, 0.0};
  EXPECT_DOUBLE_EQ(torus_sq_dist(x, y), 0.5);
}

TEST(TorusSqDist, TiesGoToPositiveHalf) {
  EXPECT_EQ(nearest_lift_offset(0.5), 0.5);
  EXPECT_EQ(nearest_lift_offset(-0.5), 0.5);
  EXPECT_EQ(nearest_lift_offset(1.5), 0.5);
  EXPECT_NEAR(nearest_lift_offset(0.7), -0.3, 1e-15);
}

TEST(DistWeak, Examples) {
  const auto a = Configuration::from_rows({{0.0}, {0.5}});
  const auto b = Configuration::from_rows({{0.45}, {0.95}});
  EXPECT_NEAR(dist_weak(a, b), 0.05, 1e-12);
  EXPECT_EQ(dist_weak(a, a), 0.0);
  EXPECT_TRUE(is_equivalent(a, a, 1e-9));
  EXPECT_FALSE(is_equivalent(Configuration::from_rows({{0.0}}), Configuration::from_rows({{0.5}}), 1e-9));
  EXPECT_THROW(dist_weak(a, Configuration::from_rows({{0.0, 1.0}, {0.0, 1.0}})), InvalidInput);
  EXPECT_THROW(dist_weak(a, Configuration::from_rows({{0.0}})), InvalidInput);
}

TEST(DistWeak, PermutedShiftedCopyIsEquivalent) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_cfg(rng, 5, 2);
    std::vector<std::size_t> idx(5);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    std::uniform_int_distribution<long> z(-4, 4);
    std::vector<long> zs(10);
    for (long& v : zs) v = z(rng);
    const auto b = shift(permute(a, Permutation(idx)), IntegerShift(5, 2, zs));
    EXPECT_LE(dist_weak(a, b), 1e-12);
    EXPECT_TRUE(is_equivalent(a, b, 1e-9));
  }
}

TEST(DistWeak, BoundedByUnmatchedDistance) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_cfg(rng, 4, 3), b = random_cfg(rng, 4, 3);
    EXPECT_LE(dist_weak(a, b), norm(a - b) + 1e-12);
  }
}

TEST(DistWeak, MetricPropertiesOnRandomTriples) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> nd(1, 6), dd(1, 3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = nd(rng), d = dd(rng);
    const auto a = random_cfg(rng, n, d), b = random_cfg(rng, n, d), c = random_cfg(rng, n, d);
    const double ab = dist_weak(a, b), ba = dist_weak(b, a);
    EXPECT_NEAR(ab, ba, 1e-9);
    EXPECT_LE(ab, dist_weak(a, c) + dist_weak(c, b) + 1e-9);
  }
}

TEST(Assignment, MatchesBruteForceUpToSix) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (std::size_t n = 1; n <= 6; ++n)
    for (int t = 0; t < 30; ++t) {
      std::vector<double> cost(n * n);
      for (double& x : cost) x = u(rng);
      const Assignment asg = solve_assignment(cost, n);
      EXPECT_NEAR(asg.cost, brute_force_cost(cost, n), 1e-9);
      std::vector<std::size_t> cols = asg.cols;
      std::sort(cols.begin(), cols.end());
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(cols[i], i);
    }
}

TEST(Assignment, HandlesTiesAndIntegerCosts) {
  const std::vector<double> cost = {1, 1, 1, 1, 1, 1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(solve_assignment(cost, 3).cost, 3.0);
  const std::vector<double> anti = {4, 1, 3, 2, 0, 5, 3, 2, 2};
  EXPECT_DOUBLE_EQ(solve_assignment(anti, 3).cost, brute_force_cost(anti, 3));
}

TEST(ConfigurationCsv, RoundTrip) {
  const auto a = Configuration::from_rows({{0.125, -3.5}, {1e-17, 42.0}});
  const auto path = std::filesystem::temp_directory_path() / "wkam_cfg_roundtrip.csv";
  {
    auto os = csv::open_output(path);
    csv::write_configuration(os, a);
  }
  EXPECT_EQ(csv::read_configuration(path), a);
  std::filesystem::remove(path);
  EXPECT_THROW(csv::read_configuration("/nonexistent/wkam.csv"), IoError);
}

}  // namespace
}  // namespace wkam
