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

#pragma once

// Hamiltonian flow  x' = -D_p H_c(x, p),  p' = D_x H_c(x, p).
// Positions are kept as lifts; potentials are periodic so no wrapping is needed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "wkam/csv.hpp"
#include "wkam/errors.hpp"
#include "wkam/model.hpp"

namespace wkam {

struct PhasePoint {
  Configuration m;
  Momentum p;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> points;

  std::size_t size() const noexcept { return points.size(); }
  double step() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  const PhasePoint& front() const { return points.front(); }
  const PhasePoint& back() const { return points.back(); }
};

enum class Scheme { verlet, midpoint };

struct MidpointOptions {
  int max_iterations = 100;
  double tolerance = 1e-14;
};

namespace detail {

/// One Stormer-Verlet step of signed size h (kick-drift-kick).
inline void verlet_step(const TonelliModel& model, PhasePoint& z, double h) {
  const auto& c = model.c();
  z.p.axpy(0.5 * h, model.potential_gradient(z.m));
  for (std::size_t i = 0; i < z.m.n_particles(); ++i)
    for (std::size_t j = 0; j < z.m.dim(); ++j) z.m(i, j) -= h * (z.p(i, j) + c[j]);
  z.p.axpy(0.5 * h, model.potential_gradient(z.m));
}

/// Implicit midpoint, solved by fixed-point iteration.
inline void midpoint_step(const TonelliModel& model, PhasePoint& z, double h, std::size_t step,
                          const MidpointOptions& opt) {
  const auto& c = model.c();
  PhasePoint next = z;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Configuration mid_m = z.m;
    mid_m.axpy(1.0, next.m) *= 0.5;
    Momentum mid_p = z.p;
    mid_p.axpy(1.0, next.p) *= 0.5;
    const Covector force = model.potential_gradient(mid_m);
    PhasePoint cand = z;
    for (std::size_t i = 0; i < z.m.n_particles(); ++i)
      for (std::size_t j = 0; j < z.m.dim(); ++j) {
        cand.m(i, j) -= h * (mid_p(i, j) + c[j]);
        cand.p(i, j) += h * force(i, j);
      }
    double change = 0.0;
    for (std::size_t k = 0; k < cand.m.size(); ++k) {
      change = std::max(change, std::abs(cand.m.values()[k] - next.m.values()[k]));
      change = std::max(change, std::abs(cand.p.values()[k] - next.p.values()[k]));
    }
    next = std::move(cand);
    if (change <= opt.tolerance * (1.0 + std::abs(h))) {
      z = std::move(next);
      return;
    }
  }
  throw IntegrationFailure("implicit midpoint: fixed-point iteration did not converge", step);
}

inline void require_phase_point(const TonelliModel& model, const PhasePoint& z) {
  model.require_shape(z.m);
  z.m.require_same_shape(z.p);
  z.m.require_finite();
  z.p.require_finite();
}

inline std::size_t step_count(double t_span, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("flow: step h must be positive");
  if (!(t_span >= h * (1.0 - 1e-12))) throw InvalidInput("flow: t_span must be >= h");
  return static_cast<std::size_t>(std::llround(t_span / h));
}

}  // namespace detail

/**
 * Discrete flow over n = round(t_span / h) uniform steps; the last time is
 * n*h. The trajectory stores n + 1 points, including the start.
 * `direction` = -1 integrates backward in time (times then decrease).
 */
inline Trajectory integrate_hamiltonian(const TonelliModel& model, const PhasePoint& start,
                                        double t_span, double h, Scheme scheme = Scheme::verlet,
                                        int direction = 1, const MidpointOptions& opt = {}) {
  detail::require_phase_point(model, start);
  const std::size_t n = detail::step_count(t_span, h);
  const double hs = direction >= 0 ? h : -h;
  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.points.reserve(n + 1);
  PhasePoint z = start;
  traj.times.push_back(0.0);
  traj.points.push_back(z);
  for (std::size_t k = 1; k <= n; ++k) {
    if (scheme == Scheme::verlet)
      detail::verlet_step(model, z, hs);
    else
      detail::midpoint_step(model, z, hs, k, opt);
    if (!z.m.all_finite() || !z.p.all_finite())
      throw IntegrationFailure("flow: state became non-finite", k);
    traj.times.push_back(static_cast<double>(k) * hs);
    traj.points.push_back(z);
  }
  return traj;
}

/// End point only; no trajectory storage.
inline PhasePoint flow_to(const TonelliModel& model, PhasePoint z, double t_span, double h) {
  detail::require_phase_point(model, z);
  const std::size_t n = detail::step_count(t_span, h);
  for (std::size_t k = 0; k < n; ++k) detail::verlet_step(model, z, h);
  return z;
}

/// Starts from velocity v0, i.e. p0 = -D_v L_c(m0, v0) = -(v0 + c).
inline Trajectory integrate_euler_lagrange(const TonelliModel& model, const Configuration& m0,
                                           const Velocity& v0, double t_span, double h,
                                           Scheme scheme = Scheme::verlet) {
  model.require_shape(m0);
  m0.require_same_shape(v0);
  return integrate_hamiltonian(model, {m0, momentum_of(model, v0)}, t_span, h, scheme);
}

inline double energy(const TonelliModel& model, const PhasePoint& z) {
  return eval_Hc(model, z.m, z.p);
}

/// max_k |H_c(z_k) - H_c(z_0)|
inline double energy_drift(const TonelliModel& model, const Trajectory& traj) {
  const double e0 = energy(model, traj.front());
  double drift = 0.0;
  for (const auto& z : traj.points) drift = std::max(drift, std::abs(energy(model, z) - e0));
  return drift;
}

/**
 * Euler-Lagrange residual of a trajectory, max over interior samples of
 * |(D_v L_c|_{k+1} - D_v L_c|_{k-1}) / 2h - D_x L_c|_k|, with D_v L_c = -p.
 * O(h^2) for Verlet trajectories.
 */
inline double euler_lagrange_residual(const TonelliModel& model, const Trajectory& traj) {
  double res = 0.0;
  const double h = std::abs(traj.step());
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    Covector r = traj.points[k - 1].p - traj.points[k + 1].p;  // D_vL_{k+1} - D_vL_{k-1}
    r *= 1.0 / (2.0 * h);
    if (traj.times[1] < traj.times[0]) r *= -1.0;
    r += model.potential_gradient(traj.points[k].m);  // - D_x L_c
    res = std::max(res, norm(r));
  }
  return res;
}

/// CSV: t, particle, x0..x{d-1}, p0..p{d-1}
inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  if (traj.points.empty()) return;
  const std::size_t d = traj.front().m.dim();
  std::vector<std::string> header = {"t", "particle"};
  for (std::size_t j = 0; j < d; ++j) header.push_back("x" + std::to_string(j));
  for (std::size_t j = 0; j < d; ++j) header.push_back("p" + std::to_string(j));
  csv::write_header(os, header);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& z = traj.points[k];
    for (std::size_t i = 0; i < z.m.n_particles(); ++i) {
      std::vector<double> row = {traj.times[k], static_cast<double>(i)};
      for (std::size_t j = 0; j < d; ++j) row.push_back(z.m(i, j));
      for (std::size_t j = 0; j < d; ++j) row.push_back(z.p(i, j));
      csv::write_row(os, row);
    }
  }
}

}  // namespace wkam
