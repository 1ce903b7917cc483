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

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "wkam/calibration.hpp"

namespace wkam {
namespace {

const GridField& cosine_field_c0() {
  static const GridField U = solve_cell(cosine_model(1, {0.0}), GridSpec::uniform(1, 1, 400));
  return U;
}

Trajectory line(const TonelliModel& model, double x0, double v, double t_span, double h) {
  Trajectory traj;
  const auto n = static_cast<std::size_t>(std::llround(t_span / h));
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * h;
    traj.times.push_back(t);
    const Velocity vel = Velocity::from_rows({{v}});
    traj.points.push_back({Configuration::from_rows({{x0 + v * t}}), momentum_of(model, vel)});
  }
  return traj;
}

TEST(GradU, ZeroField) {
  const GridField f(GridSpec::uniform(1, 2, 16), 2);
  const auto g = grad_U(f, Configuration::from_rows({{0.3, 0.7}}));
  for (double x : g.values()) EXPECT_EQ(x, 0.0);
}

TEST(GradU, LinearFieldIsExactAndScalesWithN) {
  // Two particles in d = 1: U = s0 x0 + s1 x1 on [0, 1)^2, with a seam at the
  // wrap that the kink detector must see and the probe must avoid.
  GridField f(GridSpec::uniform(2, 1, 40), 1);
  const double s0 = 0.7, s1 = -1.3;
  for (std::size_t k = 0; k < f.size(); ++k) {
    const auto m = f.node_configuration(k);
    f.values[k] = s0 * m.values()[0] + s1 * m.values()[1];
  }
  const DifferentiableField df(f);
  EXPECT_FALSE(df.kinks.empty());
  const auto g = grad_U(df, Configuration::from_rows({{0.41}, {0.53}}));
  EXPECT_NEAR(g.values()[0], 2.0 * s0, 1e-10);
  EXPECT_NEAR(g.values()[1], 2.0 * s1, 1e-10);
}

TEST(GradU, CosineSatisfiesHamiltonJacobi) {
  const GridField& U = cosine_field_c0();
  const DifferentiableField df(U);
  for (double x = 0.02; x < 0.98; x += 0.01) {
    if (df.near_kink(std::vector<double>{x})) continue;
    const double g = grad_U(df, Configuration::from_rows({{x}})).values()[0];
    EXPECT_NEAR(std::abs(g), std::sqrt(2.0 * (U.hbar - oracles::cosine_V(x))), 5e-2) << x;
  }
}

TEST(GradU, KinkAndShapeErrors) {
  const GridField& U = cosine_field_c0();
  const DifferentiableField df(U);
  ASSERT_EQ(df.kinks.size(), 1u);
  EXPECT_EQ(df.kinks.front(), 200u);
  EXPECT_THROW(grad_U(df, Configuration::from_rows({{0.5}})), NonDifferentiablePoint);
  EXPECT_THROW(grad_U(df, Configuration::from_rows({{0.5 + 1.5 / 400}})), NonDifferentiablePoint);
  EXPECT_NO_THROW(grad_U(df, Configuration::from_rows({{0.5 + 3.0 / 400}})));
  EXPECT_THROW(grad_U(df, Configuration::from_rows({{0.1}, {0.2}})), InvalidInput);
}

TEST(CalibrationResidual, Examples) {
  const auto cosine = cosine_model(1, {0.0});
  const GridField& U = cosine_field_c0();
  // Rest point.
  const Trajectory rest = line(cosine, 0.0, 0.0, 5.0, 0.01);
  EXPECT_LE(calibration_residual(cosine, U, rest, 0.0, 5.0), 1e-6);
  // A uniform drift through the well is far from calibrated.
  const Trajectory drift = line(cosine, 0.1, 0.3, 2.0, 0.01);
  EXPECT_GT(calibration_residual(cosine, U, drift, 0.0, 2.0), 0.1);

  const auto free1 = free_model(1, {1.0});
  const GridField Uf = solve_cell(free1, GridSpec::uniform(1, 1, 64));
  EXPECT_NEAR(Uf.hbar, 0.5, 1e-12);
  const Trajectory opt = line(free1, 0.2, -1.0, 3.0, 0.01);
  EXPECT_LE(calibration_residual(free1, Uf, opt, 0.0, 3.0), 1e-10);

  EXPECT_THROW(calibration_residual(free1, Uf, opt, 1.0, 1.0), InvalidInput);
  EXPECT_THROW(calibration_residual(free1, Uf, opt, 0.0, 4.0), InvalidInput);
}

TEST(Characteristic, FreeStationaryAndLine) {
  const auto free0 = free_model(1, {0.0});
  const GridField U0 = solve_cell(free0, GridSpec::uniform(1, 1, 64));
  const auto still = characteristic(free0, U0, Configuration::from_rows({{0.3}}), 2.0, 1.0, 0.01);
  EXPECT_EQ(still.residual_per_unit_time, 0.0);
  for (const auto& z : still.trajectory.points) EXPECT_EQ(z.m.values()[0], 0.3);

  const auto free1 = free_model(1, {1.0});
  const GridField U1 = solve_cell(free1, GridSpec::uniform(1, 1, 64));
  const auto curve = characteristic(free1, U1, Configuration::from_rows({{0.3}}), 2.0, 1.0, 0.01);
  EXPECT_LE(curve.residual_per_unit_time, 1e-10);
  EXPECT_NEAR(curve.t_min, -1.0, 1e-12);
  EXPECT_NEAR(curve.t_max, 2.0, 1e-12);
  EXPECT_FALSE(curve.backward_truncated);
  for (std::size_t k = 0; k < curve.trajectory.size(); ++k) {
    const auto v = velocity_of(free1, curve.trajectory.points[k].p);
    EXPECT_NEAR(v.values()[0], -1.0, 1e-12);
    EXPECT_NEAR(curve.trajectory.points[k].m.values()[0], 0.3 - curve.trajectory.times[k], 1e-12);
  }
  const auto j = curve_summary(curve);
  EXPECT_TRUE(j.contains("residual_per_unit_time"));
  EXPECT_EQ(j["span"].size(), 2u);
}

TEST(Characteristic, CosineConvergesToRestPoint) {
  const auto model = cosine_model(1, {0.0});
  const GridField& U = cosine_field_c0();
  const DifferentiableField df(U);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int done = 0;
  while (done < 10) {
    const double x = u(rng);
    if (df.near_kink(std::vector<double>{x}, 4.0)) continue;
    const auto curve = characteristic(model, df, Configuration::from_rows({{x}}), 10.0, 1.0, 0.01);
    EXPECT_LE(curve.residual_per_unit_time, 5e-3) << x;
    EXPECT_LE(std::abs(curve.energy_min - U.hbar), 1e-2);
    EXPECT_LE(std::abs(curve.energy_max - U.hbar), 1e-2);
    const double end = curve.trajectory.back().m.values()[0];
    EXPECT_NEAR(end, std::round(end), 1e-3) << x;
    EXPECT_NEAR(std::round(end), std::round(x), 0.0) << x;  // same basin
    // Backward flow heads for the kink and must have been cut short of it.
    EXPECT_TRUE(curve.backward_truncated);
    for (const auto& z : curve.trajectory.points) EXPECT_FALSE(df.near_kink(z.m.values(), 1.0));
    // Sub-intervals of a calibrated curve are calibrated too.
    EXPECT_LE(calibration_residual(model, U, curve.trajectory, 0.0, 1.0), 5e-3);
    EXPECT_LE(calibration_residual(model, U, curve.trajectory, 2.0, 7.0), 5e-3);
    ++done;
  }
}

TEST(Characteristic, OpenLoopFlowLeavesTheRestPoint) {
  const auto model = cosine_model(1, {0.0});
  CharacteristicOptions opt;
  opt.project = false;
  const auto curve =
      characteristic(model, cosine_field_c0(), Configuration::from_rows({{0.3}}), 10.0, 0.0, 0.01, opt);
  EXPECT_GT(std::abs(curve.trajectory.back().m.values()[0]), 1e-2);
}

TEST(Characteristic, Validation) {
  const auto model = cosine_model(1, {0.0});
  const auto m = Configuration::from_rows({{0.3}});
  EXPECT_THROW(characteristic(model, cosine_field_c0(), m, 0.0, 0.0, 0.01), InvalidInput);
  EXPECT_THROW(characteristic(model, cosine_field_c0(), m, 1.0, -1.0, 0.01), InvalidInput);
  EXPECT_THROW(characteristic(model, cosine_field_c0(), Configuration::from_rows({{0.5}}), 1.0, 0.0, 0.01),
               NonDifferentiablePoint);
}

TEST(Omega, FreeRelaxesImmediately) {
  const auto model = free_model(1, {1.0});
  const GridField U = solve_cell(model, GridSpec::uniform(1, 1, 64));
  const std::vector<Configuration> seeds = {Configuration::from_rows({{0.1}}),
                                            Configuration::from_rows({{0.6}})};
  const auto om = approximate_omega(model, U, seeds, 1.0, 0.01);
  ASSERT_EQ(om.points.size(), 2u);
  for (const auto& z : om.points) EXPECT_NEAR(velocity_of(model, z.p).values()[0], -1.0, 1e-12);
}

TEST(Omega, CosineRestPointIsSinglePhasePoint) {
  const auto model = cosine_model(1, {0.0});
  std::vector<Configuration> seeds;
  for (double x : {0.1, 0.3, 0.45, 0.55, 0.7, 0.9}) seeds.push_back(Configuration::from_rows({{x}}));
  const auto om = approximate_omega(model, cosine_field_c0(), seeds, 10.0, 0.01);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    EXPECT_TRUE(om.snapped[s]);
    const double x = om.points[s].m.values()[0];
    EXPECT_NEAR(x, std::round(x), 1e-10);
    EXPECT_NEAR(om.points[s].p.values()[0], 0.0, 1e-12);
    EXPECT_LE(dist_weak(om.points[s].m, om.points[0].m), 1e-10);
  }
  EXPECT_LE(om.invariance_witness, 1e-10);
}

TEST(Omega, RotatingOrbitHasEnergyHbar) {
  const double c = 2.0;
  const auto model = cosine_model(1, {c});
  CellOptions cell;
  cell.h = 0.01;
  const GridField U = solve_cell(model, GridSpec::uniform(1, 1, 400), cell);
  std::vector<Configuration> seeds;
  for (int k = 0; k < 20; ++k) seeds.push_back(Configuration::from_rows({{0.05 * k + 0.01}}));
  OmegaOptions opt;
  opt.threads = 4;
  const auto om = approximate_omega(model, U, seeds, 10.0, 0.01, opt);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    EXPECT_FALSE(om.snapped[s]);
    EXPECT_NEAR(energy(model, om.points[s]), oracles::cosine_hbar_c2, 1e-2);
    EXPECT_LT(velocity_of(model, om.points[s].p).values()[0], 0.0);  // rotating
  }
  EXPECT_LE(om.invariance_witness, 5e-2);
}

TEST(Omega, Validation) {
  const auto model = cosine_model(1, {0.0});
  EXPECT_THROW(approximate_omega(model, cosine_field_c0(), {}, 1.0, 0.01), InvalidInput);
  const std::vector<Configuration> seeds = {Configuration::from_rows({{0.2}})};
  EXPECT_THROW(approximate_omega(model, cosine_field_c0(), seeds, 0.001, 0.01), InvalidInput);
}

}  // namespace
}  // namespace wkam
