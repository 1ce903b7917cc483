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

// Calibrated curves of a computed weak KAM solution U.
//
// A curve x on [t1, t2] is calibrated when
//   U(x(t1)) - U(x(t2)) = int_{t1}^{t2} (L_c(x, x') + hbar) ds.
// Candidates come from the characteristics of the HJ system started at
// (M, grad U(M)).

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wkam/cell_solver.hpp"
#include "wkam/config_space.hpp"
#include "wkam/errors.hpp"
#include "wkam/flow.hpp"
#include "wkam/model.hpp"
#include "wkam/parallel.hpp"

namespace wkam {

namespace detail {

/// Max-norm torus distance, in grid cells, from x to the nearest listed node.
inline double cells_to_nearest(const GridField& f, std::span<const double> x,
                               std::span<const std::size_t> nodes) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t node : nodes) {
    const auto idx = f.multi_index(node);
    double worst = 0.0;
    for (std::size_t a = 0; a < f.rank(); ++a) {
      const double n = static_cast<double>(f.spec.shape[a]);
      double diff = x[a] * n - static_cast<double>(idx[a]);
      diff -= n * std::round(diff / n);
      worst = std::max(worst, std::abs(diff));
    }
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace detail

/// Field with its kink set precomputed; grad_U consults the kinks.
struct DifferentiableField {
  const GridField& field;
  std::vector<std::size_t> kinks;

  explicit DifferentiableField(const GridField& f) : field(f), kinks(detect_kinks(f)) {}

  bool near_kink(std::span<const double> x, double cells = 2.0) const {
    return !kinks.empty() && detail::cells_to_nearest(field, x, kinks) < cells;
  }
};

/// Centered difference of the interpolant with step one grid cell, returned
/// as an empirical covector (the gradient for <A,B> = (1/N) sum A_i.B_i,
/// which is N times the coordinate partials).
inline Covector grad_U(const DifferentiableField& df, const Configuration& m) {
  const GridField& f = df.field;
  if (m.n_particles() != f.spec.n_particles || m.dim() != f.dim)
    throw InvalidInput("grad_U: configuration shape does not match the grid");
  m.require_finite();
  if (df.near_kink(m.values()))
    throw NonDifferentiablePoint("grad_U: point lies within two cells of a detected kink");
  Covector g(m.n_particles(), m.dim());
  std::vector<double> x(m.values().begin(), m.values().end());
  const double N = static_cast<double>(m.n_particles());
  for (std::size_t a = 0; a < f.rank(); ++a) {
    const double dx = f.spacing(a);
    const double x0 = x[a];
    x[a] = x0 + dx;
    const double up = interpolate(f, x);
    x[a] = x0 - dx;
    const double dn = interpolate(f, x);
    x[a] = x0;
    g.values()[a] = N * (up - dn) / (2.0 * dx);
  }
  return g;
}

inline Covector grad_U(const GridField& f, const Configuration& m) {
  return grad_U(DifferentiableField(f), m);
}

/**
 * |U(x(t1)) - U(x(t2)) - int_{t1}^{t2} (L_c + hbar)| / (t2 - t1), trapezoidal
 * over the samples of traj between t1 and t2 (times ascending). The velocity
 * of a sample is -(p + c).
 */
inline double calibration_residual(const TonelliModel& model, const GridField& field,
                                   const Trajectory& traj, double t1, double t2) {
  if (!(t1 < t2)) throw InvalidInput("calibration_residual: need t1 < t2");
  if (traj.size() < 2) throw InvalidInput("calibration_residual: trajectory too short");
  const auto& ts = traj.times;
  if (!std::is_sorted(ts.begin(), ts.end()))
    throw InvalidInput("calibration_residual: trajectory times must be ascending");
  const double slack = 1e-9 * (1.0 + std::abs(ts.back() - ts.front()));
  if (t1 < ts.front() - slack || t2 > ts.back() + slack)
    throw InvalidInput("calibration_residual: interval outside the trajectory span");
  auto nearest = [&](double t) {
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    std::size_t k = static_cast<std::size_t>(it - ts.begin());
    if (k == ts.size()) return k - 1;
    if (k > 0 && t - ts[k - 1] < ts[k] - t) --k;
    return k;
  };
  const std::size_t k1 = nearest(t1), k2 = nearest(t2);
  if (k2 <= k1) throw InvalidInput("calibration_residual: interval shorter than one step");

  auto integrand = [&](std::size_t k) {
    const auto& z = traj.points[k];
    return eval_Lc(model, z.m, velocity_of(model, z.p)) + field.hbar;
  };
  double integral = 0.0;
  double prev = integrand(k1);
  for (std::size_t k = k1 + 1; k <= k2; ++k) {
    const double cur = integrand(k);
    integral += 0.5 * (prev + cur) * (ts[k] - ts[k - 1]);
    prev = cur;
  }
  const double du = interpolate(field, traj.points[k1].m) - interpolate(field, traj.points[k2].m);
  return std::abs(du - integral) / (ts[k2] - ts[k1]);
}

struct CalibratedCurve {
  Trajectory trajectory;  ///< times ascending from t_min to t_max
  double residual_per_unit_time = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  double energy_min = 0.0;
  double energy_max = 0.0;
  bool backward_truncated = false;
};

struct CharacteristicOptions {
  /// A backward step whose one-step residual exceeds this ends the backward span.
  double blowup = 0.1;
  Scheme scheme = Scheme::verlet;
  /// Reset p to grad U(x) after every step while x stays clear of the kinks.
  bool project = true;
};

namespace detail {

/// n = round(t_span / h) steps of signed size from (m, grad U(m)). With
/// `project`, each step ends by replacing p with grad U at the new position,
/// which keeps the discrete curve on the graph of dU. Without it, O(h) errors
/// in the initial covector push the curve off the stable manifold of a
/// hyperbolic rest point within a few time units. Steps taken within two
/// cells of a kink are left unprojected.
inline Trajectory graph_flow(const TonelliModel& model, const DifferentiableField& df,
                             const PhasePoint& start, double t_span, double h, int direction,
                             const CharacteristicOptions& opt) {
  if (!opt.project) return integrate_hamiltonian(model, start, t_span, h, opt.scheme, direction);
  require_phase_point(model, start);
  const std::size_t n = step_count(t_span, h);
  const double hs = direction >= 0 ? h : -h;
  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.points.reserve(n + 1);
  PhasePoint z = start;
  traj.times.push_back(0.0);
  traj.points.push_back(z);
  for (std::size_t k = 1; k <= n; ++k) {
    if (opt.scheme == Scheme::verlet)
      verlet_step(model, z, hs);
    else
      midpoint_step(model, z, hs, k, MidpointOptions{});
    if (!z.m.all_finite() || !z.p.all_finite())
      throw IntegrationFailure("characteristic: state became non-finite", k);
    if (!df.near_kink(z.m.values())) z.p = grad_U(df, z.m);
    traj.times.push_back(static_cast<double>(k) * hs);
    traj.points.push_back(z);
  }
  return traj;
}

}  // namespace detail

/**
 * Flows (m, grad U(m)) forward for t_forward and backward for t_backward
 * (see detail::graph_flow for the projection). The backward span stops early at the first sample that is near a kink or
 * whose one-step calibration residual exceeds opt.blowup.
 */
inline CalibratedCurve characteristic(const TonelliModel& model, const DifferentiableField& df,
                                      const Configuration& m, double t_forward, double t_backward,
                                      double h, const CharacteristicOptions& opt = {}) {
  if (!(t_forward > 0.0) && !(t_backward > 0.0))
    throw InvalidInput("characteristic: need a positive forward or backward span");
  if (t_forward < 0.0 || t_backward < 0.0)
    throw InvalidInput("characteristic: spans must be non-negative");
  const GridField& field = df.field;
  const PhasePoint start{m, grad_U(df, m)};

  CalibratedCurve curve;
  Trajectory back;
  if (t_backward > 0.0) back = detail::graph_flow(model, df, start, t_backward, h, -1, opt);

  std::size_t keep = 1;  // samples of `back` retained, including the start
  for (std::size_t k = 1; k < back.size(); ++k) {
    if (df.near_kink(back.points[k].m.values(), 1.0)) break;
    Trajectory seg;
    seg.times = {back.times[k], back.times[k - 1]};
    seg.points = {back.points[k], back.points[k - 1]};
    if (calibration_residual(model, field, seg, seg.times[0], seg.times[1]) > opt.blowup) break;
    keep = k + 1;
  }
  curve.backward_truncated = back.size() > 0 && keep < back.size();

  for (std::size_t k = keep; k-- > 1;) {
    curve.trajectory.times.push_back(back.times[k]);
    curve.trajectory.points.push_back(back.points[k]);
  }
  if (t_forward > 0.0) {
    Trajectory fwd = detail::graph_flow(model, df, start, t_forward, h, 1, opt);
    for (std::size_t k = 0; k < fwd.size(); ++k) {
      curve.trajectory.times.push_back(fwd.times[k]);
      curve.trajectory.points.push_back(std::move(fwd.points[k]));
    }
  } else {
    curve.trajectory.times.push_back(0.0);
    curve.trajectory.points.push_back(start);
  }

  curve.t_min = curve.trajectory.times.front();
  curve.t_max = curve.trajectory.times.back();
  curve.energy_min = std::numeric_limits<double>::infinity();
  curve.energy_max = -curve.energy_min;
  for (const auto& z : curve.trajectory.points) {
    const double e = energy(model, z);
    curve.energy_min = std::min(curve.energy_min, e);
    curve.energy_max = std::max(curve.energy_max, e);
  }
  curve.residual_per_unit_time =
      curve.t_max > curve.t_min
          ? calibration_residual(model, field, curve.trajectory, curve.t_min, curve.t_max)
          : 0.0;
  return curve;
}

inline CalibratedCurve characteristic(const TonelliModel& model, const GridField& field,
                                      const Configuration& m, double t_forward, double t_backward,
                                      double h, const CharacteristicOptions& opt = {}) {
  return characteristic(model, DifferentiableField(field), m, t_forward, t_backward, h, opt);
}

/// {residual_per_unit_time, span, energy_min, energy_max, backward_truncated}
inline nlohmann::json curve_summary(const CalibratedCurve& curve) {
  return {{"residual_per_unit_time", curve.residual_per_unit_time},
          {"span", {curve.t_min, curve.t_max}},
          {"energy_min", curve.energy_min},
          {"energy_max", curve.energy_max},
          {"backward_truncated", curve.backward_truncated}};
}

struct OmegaOptions {
  /// Relaxed points whose phase speed |x'| + |p'| falls below this are
  /// polished onto the nearby equilibrium grad Phi = 0, p = -c.
  double snap_speed = 0.1;
  double newton_tol = 1e-12;
  int newton_max_iterations = 30;
  /// Extra flow time used for the invariance witness.
  double witness_time = 1.0;
  /// Relax along the graph of dU (as characteristic() does) rather than open loop.
  bool project = true;
  unsigned threads = 1;
};

struct OmegaApproximation {
  std::vector<PhasePoint> points;
  std::vector<bool> snapped;
  /// max over points of the dist_weak from its time-witness_time image to the
  /// nearest returned configuration.
  double invariance_witness = 0.0;
};

namespace detail {

/// Newton's method on grad Phi(x) = 0 with a central finite-difference
/// Jacobian. Returns false when it fails to converge.
inline bool polish_equilibrium(const TonelliModel& model, Configuration& x, double tol,
                               int max_iterations) {
  const std::size_t n = x.size();
  auto residual = [&](const Configuration& y) {
    const Covector g = model.potential_gradient(y);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.values().data(),
                                                             static_cast<Eigen::Index>(n)));
  };
  Configuration y = x;
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd F = residual(y);
    if (F.norm() <= tol) {
      x = y;
      return true;
    }
    Eigen::MatrixXd J(n, n);
    constexpr double step = 1e-6;
    for (std::size_t k = 0; k < n; ++k) {
      Configuration yp = y, ym = y;
      yp.values()[k] += step;
      ym.values()[k] -= step;
      J.col(static_cast<Eigen::Index>(k)) = (residual(yp) - residual(ym)) / (2.0 * step);
    }
    const Eigen::VectorXd dx = J.colPivHouseholderQr().solve(-F);
    if (!dx.allFinite()) return false;
    for (std::size_t k = 0; k < n; ++k) y.values()[k] += dx[static_cast<Eigen::Index>(k)];
  }
  if (residual(y).norm() <= tol * 1e3) {
    x = y;
    return true;
  }
  return false;
}

inline double phase_speed(const TonelliModel& model, const PhasePoint& z) {
  return norm(velocity_of(model, z.p)) + norm(model.potential_gradient(z.m));
}

}  // namespace detail

/**
 * Relaxes each seed forward along its characteristic for t_relax. Slow
 * relaxed points are snapped to the equilibrium they approach, which the
 * flow itself only reaches asymptotically.
 */
inline OmegaApproximation approximate_omega(const TonelliModel& model, const GridField& field,
                                            std::span<const Configuration> seeds, double t_relax,
                                            double h, const OmegaOptions& opt = {}) {
  if (seeds.empty()) throw InvalidInput("approximate_omega: no seeds");
  if (!(t_relax >= h)) throw InvalidInput("approximate_omega: t_relax must be >= h");
  const DifferentiableField df(field);
  OmegaApproximation out;
  out.points.resize(seeds.size(), PhasePoint{seeds[0], Momentum(seeds[0].n_particles(), seeds[0].dim())});
  std::vector<char> snapped(seeds.size(), 0);
  parallel_for(seeds.size(), opt.threads, [&](std::size_t s) {
    CharacteristicOptions copt;
    copt.project = opt.project;
    PhasePoint z =
        detail::graph_flow(model, df, {seeds[s], grad_U(df, seeds[s])}, t_relax, h, 1, copt).back();
    if (detail::phase_speed(model, z) < opt.snap_speed) {
      Configuration x = z.m;
      if (detail::polish_equilibrium(model, x, opt.newton_tol, opt.newton_max_iterations) &&
          dist_weak(x, z.m) < 0.1) {
        Momentum p(x.n_particles(), x.dim());
        for (std::size_t i = 0; i < p.n_particles(); ++i)
          for (std::size_t j = 0; j < p.dim(); ++j) p(i, j) = -model.c()[j];
        z = {std::move(x), std::move(p)};
        snapped[s] = 1;
      }
    }
    out.points[s] = std::move(z);
  });
  out.snapped.assign(snapped.begin(), snapped.end());

  std::vector<double> witness(out.points.size(), 0.0);
  parallel_for(out.points.size(), opt.threads, [&](std::size_t s) {
    const PhasePoint img = flow_to(model, out.points[s], opt.witness_time, h);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : out.points) best = std::min(best, dist_weak(img.m, q.m));
    witness[s] = best;
  });
  out.invariance_witness = *std::max_element(witness.begin(), witness.end());
  return out;
}

}  // namespace wkam
