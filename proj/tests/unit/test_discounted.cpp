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
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "random_model.hpp"
#include "wkam/config_space.hpp"
#include "wkam/discounted.hpp"

namespace wkam {
namespace {

using testing::random_array;

std::vector<Configuration> constant_path(const Configuration& m0, std::size_t K) {
  return std::vector<Configuration>(K, m0);
}

/// The same sum in long double, written independently of the solver.
long double reference_action(const TonelliModel& model, const DiscountedSpec& s,
                             const std::vector<Configuration>& xs, const Configuration& m0) {
  const long double h = s.step();
  long double total = 0.0L;
  const Configuration* prev = &m0;
  for (std::size_t k = 0; k < s.steps_K; ++k) {
    const Configuration& next = xs[k];
    Velocity v(m0.n_particles(), m0.dim());
    for (std::size_t q = 0; q < v.size(); ++q)
      v.values()[q] = static_cast<double>((static_cast<long double>(next.values()[q]) - prev->values()[q]) / h);
    const long double w = std::exp(-static_cast<long double>(s.epsilon) * h * static_cast<long double>(k));
    total += h * w * static_cast<long double>(eval_Lc(model, *prev, v));
    prev = &next;
  }
  return total;
}

TEST(DiscountedSpec, ValidatesHorizonAgainstTail) {
  const auto model = cosine_model(1, {0.0});
  EXPECT_THROW(DiscountedSpec::make(model, 0.0, 10, 100, 1e-7, 1e-3), InvalidInput);
  EXPECT_THROW(DiscountedSpec::make(model, -1.0, 10, 100, 1e-7, 1e-3), InvalidInput);
  EXPECT_THROW(DiscountedSpec::make(model, 0.1, 10, 100, 1e-7, 1e-3), InvalidInput);
  EXPECT_THROW(DiscountedSpec::make(model, 0.5, 10, 0, 1e-7, 1e-3), InvalidInput);
  const double T = minimal_horizon(model, 0.5, 1e-3);
  const auto spec = DiscountedSpec::make(model, 0.5, T, 100, 1e-7, 1e-3);
  const auto [lo, hi] = tail_interval(model, spec);
  EXPECT_LE(hi - lo, 1e-3 * (1 + 1e-9));
  EXPECT_LE(lo, 0.0);
  EXPECT_GE(hi, 0.0);
  // Free model at c = 0 has an empty tail: any horizon is valid.
  EXPECT_EQ(minimal_horizon(free_model(1, {0.0}), 0.1, 1e-6), 0.0);
}

TEST(DiscountedAction, ConstantTrajectories) {
  std::mt19937_64 rng(21);
  const auto free = free_model(2, {0.0, 0.0});
  const auto m0 = random_array<PositionTag>(rng, 3, 2);
  const auto s0 = DiscountedSpec::make(free, 0.2, 50, 200, 1e-7, 1e-3);
  EXPECT_EQ(discounted_action(free, s0, constant_path(m0, 200), m0), 0.0);

  const auto model = cosine_model(1, {0.3});
  const auto half = Configuration::from_rows({{0.5}});
  const auto spec = DiscountedSpec::make(model, 0.5, 30, 300, 1e-7, 1e-3);
  const double h = spec.step(), q = std::exp(-spec.epsilon * h);
  const double geometric = h * 2.0 * (1.0 - std::pow(q, 300.0)) / (1.0 - q);
  EXPECT_NEAR(discounted_action(model, spec, constant_path(half, 300), half), geometric, 1e-12);
  EXPECT_THROW(discounted_action(model, spec, constant_path(half, 299), half), InvalidInput);
}

TEST(DiscountedAction, MatchesExtendedPrecisionSum) {
  std::mt19937_64 rng(22);
  for (int probe = 0; probe < 5; ++probe) {
    const auto model = testing::random_model(rng, 2);
    const auto spec = DiscountedSpec::make(model, 0.7, 40, 400, 1e-7, 1e-2);
    const auto m0 = random_array<PositionTag>(rng, 3, 2);
    std::vector<Configuration> xs;
    for (std::size_t k = 0; k < spec.steps_K; ++k) xs.push_back(random_array<PositionTag>(rng, 3, 2));
    const double got = discounted_action(model, spec, xs, m0);
    const long double ref = reference_action(model, spec, xs, m0);
    EXPECT_NEAR(got, static_cast<double>(ref), 1e-12 * std::abs(static_cast<double>(ref)));
  }
}

TEST(DiscountedAction, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(23);
  const auto model = testing::random_model(rng, 2);
  const auto spec = DiscountedSpec::make(model, 0.7, 40, 40, 1e-7, 1e-2);
  const auto m0 = random_array<PositionTag>(rng, 2, 2);
  std::vector<Configuration> xs;
  for (std::size_t k = 0; k < spec.steps_K; ++k) xs.push_back(random_array<PositionTag>(rng, 2, 2));
  const auto g = discounted_action_gradient(model, spec, xs, m0);
  constexpr double s = 1e-6;
  double worst = 0.0;
  for (std::size_t k = 0; k < spec.steps_K; ++k)
    for (std::size_t q = 0; q < xs[k].size(); ++q) {
      auto xp = xs, xm = xs;
      xp[k].values()[q] += s;
      xm[k].values()[q] -= s;
      const double fd = 2.0 * (discounted_action(model, spec, xp, m0) - discounted_action(model, spec, xm, m0)) / (2 * s);
      const double an = g[k].values()[q];
      worst = std::max(worst, std::abs(an - fd) / std::max(1.0, std::abs(fd)));
    }
  EXPECT_LE(worst, 1e-5);
}

TEST(MinimizeDiscounted, FreeZeroCostStaysAtRest) {
  std::mt19937_64 rng(24);
  const auto model = free_model(2, {0.0, 0.0});
  const auto m0 = random_array<PositionTag>(rng, 3, 2);
  const auto sol = minimize_discounted(model, DiscountedSpec::make(model, 0.3, 20, 100, 1e-9, 1e-3), m0);
  EXPECT_EQ(sol.value, 0.0);
  for (const auto& z : sol.trajectory.points)
    for (std::size_t q = 0; q < m0.size(); ++q) EXPECT_EQ(z.m.values()[q], m0.values()[q]);
  const Covector g = grad_V_eps(sol);
  for (double x : g.values()) EXPECT_EQ(x, 0.0);
}

TEST(MinimizeDiscounted, FreeLinearCostClosedForm) {
  const auto model = free_model(1, {1.0});
  const double eps = 0.2;
  const auto m0 = Configuration::from_rows({{0.1}, {0.6}});
  const auto spec = DiscountedSpec::make(model, eps, minimal_horizon(model, eps, 1e-4) + 1.0, 800, 1e-9, 1e-4);
  const auto sol = minimize_discounted(model, spec, m0);
  EXPECT_LE(sol.grad_norm, spec.tol_grad);
  // Constant velocity -c: discrete action -(c^2/2) sum h q^k.
  const double h = spec.step(), q = std::exp(-eps * h);
  const double discrete = -0.5 * h * (1.0 - std::pow(q, static_cast<double>(spec.steps_K))) / (1.0 - q);
  EXPECT_NEAR(sol.action, discrete, 1e-7);
  EXPECT_NEAR(sol.value, -0.5 / eps, 2e-2 / eps * eps * h + 1e-4 + 0.5 * h);
  for (std::size_t k = 0; k + 1 < sol.trajectory.size(); ++k)
    EXPECT_NEAR(sol.trajectory.points[k + 1].m(0, 0) - sol.trajectory.points[k].m(0, 0), -h, 1e-8);
  // grad V = -(v + c) + h D_x L_c = 0 for the free model.
  const Covector g = grad_V_eps(sol);
  for (double x : g.values()) EXPECT_NEAR(x, 0.0, 1e-7);
  EXPECT_LE(sol.el_residual, 1e-5);
}

TEST(MinimizeDiscounted, CosineLeavesTheWorstPoint) {
  // m0 = 1/2 is a stationary point of the action (a saddle); the minimizer
  // falls to a rest point at an integer where L_c = 0.
  const auto model = cosine_model(1, {0.0});
  const auto m0 = Configuration::from_rows({{0.5}});
  const double eps = 0.05;
  const auto spec = DiscountedSpec::make(model, eps, minimal_horizon(model, eps, 1e-3), 2000, 1e-7, 1e-3);
  const auto sol = minimize_discounted(model, spec, m0);
  EXPECT_LE(sol.grad_norm, spec.tol_grad);
  const double x_end = sol.trajectory.back().m(0, 0);
  EXPECT_NEAR(x_end - std::round(x_end), 0.0, 1e-3);
  EXPECT_NEAR(std::abs(x_end - 0.5), 0.5, 1e-3);
  // The value is bounded by the cost of reaching the rest point.
  EXPECT_GT(sol.value, 0.0);
  EXPECT_LT(eps * sol.value, 0.05);

  const auto est = estimate_hbar_discounted(model, m0, std::vector<double>{0.2, 0.1, 0.05}, {});
  EXPECT_NEAR(est.hbar, 0.0, 1e-2);
}

TEST(MinimizeDiscounted, GradientOfValueMatchesFiniteDifferences) {
  std::mt19937_64 rng(25);
  const auto model = cosine_model(1, {0.3});
  const double eps = 0.5;
  const auto spec = DiscountedSpec::make(model, eps, minimal_horizon(model, eps, 1e-4), 600, 1e-10, 1e-4, 20000);
  const auto m0 = Configuration::from_rows({{0.12}, {0.31}});
  const auto sol = minimize_discounted(model, spec, m0);
  const Covector g = grad_V_eps(sol);
  std::normal_distribution<double> nd;
  for (int dir = 0; dir < 3; ++dir) {
    Configuration u(2, 1);
    for (double& x : u.values()) x = nd(rng);
    u *= 1.0 / norm(u);
    constexpr double s = 1e-4;
    Configuration mp = m0, mm = m0;
    mp.axpy(s, u);
    mm.axpy(-s, u);
    const double fd = (minimize_discounted(model, spec, mp, &sol.trajectory).value -
                       minimize_discounted(model, spec, mm, &sol.trajectory).value) / (2 * s);
    const double an = inner(g, u);
    EXPECT_LE(std::abs(an - fd), 1e-3 * std::max(std::abs(fd), 1e-1)) << "direction " << dir;
  }
}

TEST(MinimizeDiscounted, ValueInvariantUnderShiftAndPermutation) {
  const auto model = make_mechanical_model(TrigPotential::cosine_well(1), TrigPotential::cosine_well(1, 0.3), {0.4});
  const double eps = 0.5;
  const auto spec = DiscountedSpec::make(model, eps, minimal_horizon(model, eps, 1e-3), 400, 1e-8, 1e-3);
  const auto m0 = Configuration::from_rows({{0.1}, {0.35}, {0.8}});
  const double v0 = minimize_discounted(model, spec, m0).value;
  const auto m1 = shift(permute(m0, Permutation({2, 0, 1})), IntegerShift(3, 1, {1, -1, 3}));
  EXPECT_NEAR(minimize_discounted(model, spec, m1).value, v0, 1e-6);
}

TEST(MinimizeDiscounted, DynamicProgrammingAndLongerHorizon) {
  const auto model = cosine_model(1, {0.6});
  const double eps = 0.5, tol = 1e-3;
  const auto spec = DiscountedSpec::make(model, eps, 2.0 * minimal_horizon(model, eps, tol), 600, 1e-8, tol);
  const auto m0 = Configuration::from_rows({{0.2}});
  const auto sol = minimize_discounted(model, spec, m0);

  // Split at t_j: head action plus discounted value from x_j.
  const std::size_t j = 100;
  const double h = spec.step();
  double head = 0.0;
  for (std::size_t k = 0; k < j; ++k) {
    Velocity v(1, 1);
    v(0, 0) = (sol.trajectory.points[k + 1].m(0, 0) - sol.trajectory.points[k].m(0, 0)) / h;
    head += h * std::exp(-eps * h * static_cast<double>(k)) * eval_Lc(model, sol.trajectory.points[k].m, v);
  }
  const auto tail = minimize_discounted(model, spec, sol.trajectory.points[j].m);
  const double split = head + std::exp(-eps * h * static_cast<double>(j)) * tail.value;
  EXPECT_NEAR(split, sol.value, tol);

  DiscountedSpec doubled = spec;
  doubled.horizon_T *= 2.0;
  doubled.steps_K *= 2;
  EXPECT_NEAR(minimize_discounted(model, doubled, m0).value, sol.value, tol);
}

TEST(MinimizeDiscounted, NonConvergenceCarriesBestIterate) {
  const auto model = cosine_model(1, {0.6});
  const auto spec = DiscountedSpec::make(model, 0.5, 20, 400, 1e-12, 1e-2, 2);
  try {
    minimize_discounted(model, spec, Configuration::from_rows({{0.2}}));
    FAIL() << "expected non-convergence";
  } catch (const DiscountedNonConvergence& e) {
    EXPECT_EQ(e.best().trajectory.size(), 401u);
    EXPECT_GT(e.best().grad_norm, 1e-12);
    EXPECT_FALSE(e.history().empty());
  }
}

TEST(MinimizeDiscounted, WarmStartReducesIterations) {
  // Rotating regime: the warm trajectory already carries the right phase.
  const auto model = cosine_model(1, {2.0});
  const auto m0 = Configuration::from_rows({{0.2}});
  DiscountedTemplate t;
  const auto coarse = minimize_discounted(model, spec_for(model, 0.4, t), m0);
  const auto spec = spec_for(model, 0.2, t);
  const auto cold = minimize_discounted(model, spec, m0);
  const auto warm = minimize_discounted(model, spec, m0, &coarse.trajectory);
  EXPECT_NEAR(cold.value, warm.value, 1e-6);
  EXPECT_LT(warm.iterations, cold.iterations);
}

TEST(Extrapolation, ExactForQuadratics) {
  std::vector<SweepRow> rows;
  for (double e : {0.4, 0.2, 0.1, 0.05}) rows.push_back({e, 0, -0.7 + 0.3 * e - 2.0 * e * e});
  EXPECT_NEAR(extrapolate_to_zero(rows), -0.7, 1e-13);
  EXPECT_THROW(extrapolate_to_zero(std::span(rows).first(2)), InvalidInput);
}

TEST(EstimateHbar, FreeModel) {
  const auto m0 = Configuration::from_rows({{0.0}});
  const std::vector<double> eps = {0.4, 0.2, 0.1};
  EXPECT_NEAR(estimate_hbar_discounted(free_model(1, {0.0}), m0, eps, {}).hbar, 0.0, 1e-12);
  const auto est = estimate_hbar_discounted(free_model(1, {1.0}), m0, eps, {});
  EXPECT_NEAR(est.hbar, oracles::free_hbar(1.0), 1e-3);
  ASSERT_EQ(est.table.size(), 3u);
  std::ostringstream os;
  write_sweep(os, est.table);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')),
            "epsilon,value,eps_times_value,grad_norm,el_residual,tail_lo,tail_hi");
  const std::vector<double> bad = {0.1, 0.2, 0.05};
  EXPECT_THROW(estimate_hbar_discounted(free_model(1, {1.0}), m0, bad, {}), InvalidInput);
  EXPECT_THROW(estimate_hbar_discounted(free_model(1, {1.0}), m0, std::span(eps).first(2), {}), InvalidInput);
}

TEST(EstimateHbar, CosineMatchesQuadratureOracle) {
  const auto est = estimate_hbar_discounted(cosine_model(1, {2.0}), Configuration::from_rows({{0.0}}),
                                            std::vector<double>{0.4, 0.2, 0.1}, {});
  EXPECT_NEAR(est.hbar, oracles::cosine_hbar_c2, 1e-2);
}

}  // namespace
}  // namespace wkam
