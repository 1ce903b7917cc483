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

/**
 * Discounted infinite-horizon problem
 *
 *   V_eps(M) = inf { int_0^inf e^{-eps t} L_c(x, x') dt : x(0) = M }
 *
 * truncated at a horizon T with a rigorous tail interval, discretized with K
 * uniform steps and left-endpoint quadrature, and minimized over the free
 * nodes x_1..x_K (x_0 = M fixed, x_K free) by preconditioned nonlinear
 * conjugate gradients. The preconditioner is the kinetic Hessian, a
 * tridiagonal matrix per particle coordinate, plus the potential Hessian
 * diagonal at the current iterate (only its convex part where the full
 * signed version is not positive definite). Steps are capped at a quarter
 * period per coordinate, and stationary points where the signed
 * approximation has a negative pivot are escaped along the matching
 * negative-curvature direction.
 *
 * The vanishing-discount limit eps V_eps -> -Hbar(c) is extrapolated from a
 * sweep over decreasing eps.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wkam/csv.hpp"
#include "wkam/errors.hpp"
#include "wkam/flow.hpp"
#include "wkam/model.hpp"

namespace wkam {

struct DiscountedSpec {
  double epsilon = 0.1;
  double horizon_T = 100.0;
  std::size_t steps_K = 1000;
  double tol_grad = 1e-7;
  double value_tol = 1e-3;
  std::size_t max_iters = 5000;

  double step() const { return horizon_T / static_cast<double>(steps_K); }

  /// Validates these settings against the model: the tail interval width
  /// e^{-eps T} (C + cbar) / eps must not exceed value_tol.
  static DiscountedSpec make(const TonelliModel& model, double epsilon, double horizon_T,
                             std::size_t steps_K, double tol_grad, double value_tol,
                             std::size_t max_iters = 5000) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw InvalidInput("discounted: epsilon must be positive");
    if (!(horizon_T > 0.0) || !std::isfinite(horizon_T))
      throw InvalidInput("discounted: horizon must be positive");
    if (steps_K < 1) throw InvalidInput("discounted: steps_K must be >= 1");
    if (!(tol_grad > 0.0)) throw InvalidInput("discounted: tol_grad must be positive");
    if (!(value_tol > 0.0)) throw InvalidInput("discounted: value_tol must be positive");
    const double width = std::exp(-epsilon * horizon_T) *
                         (model.zero_velocity_bound() + model.lower_shift()) / epsilon;
    if (width > value_tol * (1.0 + 1e-12))
      throw InvalidInput("discounted: horizon too short, tail interval width " +
                         csv::format(width) + " exceeds value tolerance " +
                         csv::format(value_tol));
    return {epsilon, horizon_T, steps_K, tol_grad, value_tol, max_iters};
  }
};

/// Shortest horizon whose tail interval fits in value_tol.
inline double minimal_horizon(const TonelliModel& model, double epsilon, double value_tol) {
  const double width0 = (model.zero_velocity_bound() + model.lower_shift()) / epsilon;
  if (width0 <= value_tol) return 0.0;
  return std::log(width0 / value_tol) / epsilon;
}

/// e^{-eps T} V_eps(x(T)) lies in [-e^{-eps T} cbar / eps, e^{-eps T} C / eps].
inline std::pair<double, double> tail_interval(const TonelliModel& model, const DiscountedSpec& s) {
  const double f = std::exp(-s.epsilon * s.horizon_T) / s.epsilon;
  return {0.0 - f * model.lower_shift(), f * model.zero_velocity_bound()};
}

struct DiscountedSolution {
  /// t_k = k h, positions x_k, and the discrete momenta
  /// p_k = -D_v L_c(x_k, v_k) + h D_x L_c(x_k, v_k)  (k < K),  p_K = -D_v L_c(x_{K-1}, v_{K-1})
  Trajectory trajectory;
  double action = 0.0;  ///< truncated discrete action at the minimizer
  double value = 0.0;   ///< action + midpoint of the tail interval
  double tail_lo = 0.0;
  double tail_hi = 0.0;
  double grad_norm = 0.0;
  double el_residual = 0.0;
  /// |-D_p H_c(m0, grad_V) - v_0|, O(h)
  double velocity_consistency = 0.0;
  Covector grad_V;
  std::size_t iterations = 0;
};

class DiscountedNonConvergence : public NonConvergence {
 public:
  DiscountedNonConvergence(const std::string& what, std::vector<double> history,
                           DiscountedSolution best)
      : NonConvergence(what, std::move(history)), best_(std::move(best)) {}

  const DiscountedSolution& best() const noexcept { return best_; }

 private:
  DiscountedSolution best_;
};

namespace detail {

/// Free nodes x_1..x_K stored flat, node-major: X[(k-1) * N*d + i*d + j].
struct DiscountedProblem {
  const TonelliModel& model;
  double eps;
  double h;
  std::size_t K;
  Configuration m0;
  std::size_t n, d, stride;
  std::vector<double> w;  ///< e^{-eps t_k}, k = 0..K-1

  DiscountedProblem(const TonelliModel& mdl, const DiscountedSpec& s, Configuration start)
      : model(mdl),
        eps(s.epsilon),
        h(s.step()),
        K(s.steps_K),
        m0(std::move(start)),
        n(m0.n_particles()),
        d(m0.dim()),
        stride(n * d),
        w(K) {
    for (std::size_t k = 0; k < K; ++k) w[k] = std::exp(-eps * h * static_cast<double>(k));
  }

  const double* node(std::span<const double> X, std::size_t k) const {
    return k == 0 ? m0.values().data() : X.data() + (k - 1) * stride;
  }

  /// Action and, when grad is non-empty, its empirical gradient w.r.t. x_1..x_K:
  /// G_k = h w_k D_xL_c|_k - w_k D_vL_c|_k + w_{k-1} D_vL_c|_{k-1}.
  double evaluate(std::span<const double> X, std::span<double> grad) const {
    const auto& c = model.c();
    const bool want = !grad.empty();
    if (want) std::fill(grad.begin(), grad.end(), 0.0);
    Configuration x(n, d);
    double S = 0.0;
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k < K; ++k) {
      const double* xk = node(X, k);
      const double* xk1 = node(X, k + 1);
      std::copy(xk, xk + stride, x.values().begin());
      double kin = 0.0, lin = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const double v = (xk1[i * d + j] - xk[i * d + j]) / h;
          kin += 0.5 * v * v;
          lin += c[j] * v;
        }
      const double Lc = (kin + lin) / nn - model.potential_energy(x);
      S += h * w[k] * Lc;
      if (!want) continue;
      const Covector gphi = model.potential_gradient(x);  // D_x L_c = -gphi
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          const std::size_t e = i * d + j;
          const double dv = (xk1[e] - xk[e]) / h + c[j];
          if (k >= 1) grad[(k - 1) * stride + e] += -h * w[k] * gphi(i, j) - w[k] * dv;
          grad[k * stride + e] += w[k] * dv;
        }
    }
    return S;
  }

  /// Empirical inner product summed over nodes.
  double dot(std::span<const double> a, std::span<const double> b) const {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s / static_cast<double>(n);
  }

  /// Diagonal of the potential part of the Hessian at the nodes x_1..x_{K-1},
  /// h w_k (-d^2 Phi) in empirical coordinates. Negative entries are clamped
  /// to zero unless `signed_entries` is set.
  std::vector<double> curvature_diagonal(std::span<const double> X,
                                         bool signed_entries = false) const {
    std::vector<double> diag(K * stride, 0.0);
    const auto& V = model.external();
    const auto& W = model.interaction();
    std::vector<double> hess(d * d), diff(d);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t k = 1; k < K; ++k) {
      const double* xk = node(X, k);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> acc(d, 0.0);
        if (!V.empty()) {
          V.hessian({xk + i * d, d}, hess);
          for (std::size_t j = 0; j < d; ++j) acc[j] += hess[j * d + j];
        }
        if (!W.empty())
          for (std::size_t l = 0; l < n; ++l) {
            if (l == i) continue;
            for (std::size_t j = 0; j < d; ++j) diff[j] = xk[i * d + j] - xk[l * d + j];
            W.hessian(diff, hess);
            for (std::size_t j = 0; j < d; ++j) acc[j] += 2.0 * inv_n * hess[j * d + j];
          }
        for (std::size_t j = 0; j < d; ++j)
          diag[(k - 1) * stride + i * d + j] =
              h * w[k] * (signed_entries ? -acc[j] : std::max(0.0, -acc[j]));
      }
    }
    return diag;
  }

  /// Solves A y = g by the Thomas algorithm. A is the kinetic Hessian
  /// (tridiagonal in time, the same for every particle coordinate) plus the
  /// optional diagonal `extra`. Returns false, leaving y unspecified, when a
  /// pivot is not safely positive.
  bool precondition(std::span<const double> g, std::span<double> y,
                    std::span<const double> extra = {}) const {
    // A_jj = (w_{j-1} + w_j)/h for j < K, w_{K-1}/h for j = K; A_{j,j+1} = -w_j/h.
    std::vector<double> cp(K), dp(K);
    for (std::size_t e = 0; e < stride; ++e) {
      for (std::size_t j = 1; j <= K; ++j) {
        double diag = (j < K ? w[j - 1] + w[j] : w[j - 1]) / h;
        if (!extra.empty()) diag += extra[(j - 1) * stride + e];
        const double lower = j > 1 ? -w[j - 1] / h : 0.0;
        const double upper = j < K ? -w[j] / h : 0.0;
        const double rhs = g[(j - 1) * stride + e];
        const double denom = diag - (j > 1 ? lower * cp[j - 2] : 0.0);
        if (!(denom > 1e-10 * w[j - 1] / h)) return false;
        cp[j - 1] = upper / denom;
        dp[j - 1] = (rhs - (j > 1 ? lower * dp[j - 2] : 0.0)) / denom;
      }
      y[(K - 1) * stride + e] = dp[K - 1];
      for (std::size_t j = K - 1; j >= 1; --j)
        y[(j - 1) * stride + e] = dp[j - 1] - cp[j - 1] * y[j * stride + e];
    }
    return true;
  }

  /// Direction of negative curvature of the signed approximation, from the
  /// first non-positive pivot of its LDL^T factorization: y = L^{-T} e_j on
  /// the leading block. Returns false when the approximation is positive
  /// definite.
  bool negative_curvature(std::span<const double> X, std::span<double> y) const {
    const auto extra = curvature_diagonal(X, true);
    std::vector<double> cp(K);
    for (std::size_t e = 0; e < stride; ++e) {
      for (std::size_t j = 1; j <= K; ++j) {
        const double diag = (j < K ? w[j - 1] + w[j] : w[j - 1]) / h + extra[(j - 1) * stride + e];
        const double lower = j > 1 ? -w[j - 1] / h : 0.0;
        const double upper = j < K ? -w[j] / h : 0.0;
        const double denom = diag - (j > 1 ? lower * cp[j - 2] : 0.0);
        if (denom > 1e-10 * w[j - 1] / h) {
          cp[j - 1] = upper / denom;
          continue;
        }
        std::fill(y.begin(), y.end(), 0.0);
        double yi = 1.0;
        y[(j - 1) * stride + e] = yi;
        for (std::size_t i = j - 1; i >= 1; --i) {
          yi = -cp[i - 1] * yi;
          y[(i - 1) * stride + e] = yi;
        }
        return true;
      }
    }
    return false;
  }

  /// Uses the signed curvature when the resulting matrix is positive
  /// definite (exact Newton for W = 0 in one dimension), else the clamped one.
  void precondition_at(std::span<const double> X, std::span<const double> g,
                       std::span<double> y) const {
    if (precondition(g, y, curvature_diagonal(X, true))) return;
    precondition(g, y, curvature_diagonal(X, false));
  }
};

/// Without a warm trajectory: the cheaper of rest at m0 and the free-particle
/// drift x(t) = m0 - c t. With one: linear interpolation in time, continued
/// at its final velocity past its end, translated to start at m0.
inline std::vector<double> initial_nodes(const DiscountedProblem& P, const Trajectory* warm) {
  std::vector<double> X(P.K * P.stride);
  const auto m0 = P.m0.values();
  if (warm == nullptr || warm->size() < 2) {
    const auto& c = P.model.c();
    std::vector<double> drift(X.size());
    for (std::size_t k = 1; k <= P.K; ++k)
      for (std::size_t e = 0; e < P.stride; ++e) {
        X[(k - 1) * P.stride + e] = m0[e];
        drift[(k - 1) * P.stride + e] = m0[e] - c[e % P.d] * P.h * static_cast<double>(k);
      }
    if (P.evaluate(drift, {}) < P.evaluate(X, {})) X.swap(drift);
    return X;
  }
  const double hw = warm->step();
  const auto w0 = warm->points[0].m.values();
  for (std::size_t k = 1; k <= P.K; ++k) {
    double* xk = X.data() + (k - 1) * P.stride;
    const double s = P.h * static_cast<double>(k) / hw;
    const std::size_t k0 = std::min(static_cast<std::size_t>(s), warm->size() - 2);
    const double f = s - static_cast<double>(k0);
    const auto a = warm->points[k0].m.values();
    const auto b = warm->points[k0 + 1].m.values();
    for (std::size_t e = 0; e < P.stride; ++e)
      xk[e] = (1.0 - f) * a[e] + f * b[e] - w0[e] + m0[e];
  }
  return X;
}

inline DiscountedSolution assemble_solution(const DiscountedProblem& P, const DiscountedSpec& spec,
                                            std::span<const double> X,
                                            std::span<const double> grad, double action,
                                            std::size_t iters) {
  DiscountedSolution sol;
  const auto& c = P.model.c();
  const std::size_t n = P.n, d = P.d;
  sol.action = action;
  std::tie(sol.tail_lo, sol.tail_hi) = tail_interval(P.model, spec);
  sol.value = action + 0.5 * (sol.tail_lo + sol.tail_hi);
  sol.grad_norm = std::sqrt(P.dot(grad, grad));
  sol.iterations = iters;

  double el = 0.0;
  for (std::size_t k = 1; k < P.K; ++k) {
    double s = 0.0;
    for (std::size_t e = 0; e < P.stride; ++e) s += grad[(k - 1) * P.stride + e] * grad[(k - 1) * P.stride + e];
    el = std::max(el, std::sqrt(s / static_cast<double>(n)) / P.h);
  }
  sol.el_residual = el;

  Configuration x(n, d);
  Momentum p(n, d);
  sol.trajectory.times.reserve(P.K + 1);
  sol.trajectory.points.reserve(P.K + 1);
  for (std::size_t k = 0; k <= P.K; ++k) {
    const double* xk = P.node(X, k);
    std::copy(xk, xk + P.stride, x.values().begin());
    const bool last = k == P.K;
    const double* a = last ? P.node(X, k - 1) : xk;
    const double* b = last ? xk : P.node(X, k + 1);
    Covector gphi(n, d);
    if (!last) gphi = P.model.potential_gradient(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t e = i * d + j;
        const double dv = (b[e] - a[e]) / P.h + c[j];
        p(i, j) = -dv - (last ? 0.0 : P.h * gphi(i, j));
      }
    sol.trajectory.times.push_back(P.h * static_cast<double>(k));
    sol.trajectory.points.push_back({x, p});
  }
  sol.grad_V = sol.trajectory.points[0].p;

  double vc = 0.0;
  const double* x1 = P.node(X, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t e = i * d + j;
      const double v0 = (x1[e] - P.m0.values()[e]) / P.h;
      const double from_grad = -(sol.grad_V(i, j) + c[j]);
      vc += (v0 - from_grad) * (v0 - from_grad);
    }
  sol.velocity_consistency = std::sqrt(vc / static_cast<double>(n));
  return sol;
}

}  // namespace detail

/// Left-endpoint discrete action sum_{k<K} h e^{-eps t_k} L_c(x_k, (x_{k+1} - x_k)/h).
/// free_traj holds x_1..x_K.
inline double discounted_action(const TonelliModel& model, const DiscountedSpec& spec,
                                std::span<const Configuration> free_traj,
                                const Configuration& m0) {
  model.require_shape(m0);
  if (free_traj.size() != spec.steps_K)
    throw InvalidInput("discounted_action: expected steps_K free configurations");
  detail::DiscountedProblem P(model, spec, m0);
  std::vector<double> X(P.K * P.stride);
  for (std::size_t k = 0; k < P.K; ++k) {
    m0.require_same_shape(free_traj[k]);
    std::copy(free_traj[k].values().begin(), free_traj[k].values().end(),
              X.begin() + static_cast<std::ptrdiff_t>(k * P.stride));
  }
  return P.evaluate(X, {});
}

/// Empirical gradient of discounted_action with respect to x_1..x_K.
inline std::vector<Covector> discounted_action_gradient(const TonelliModel& model,
                                                        const DiscountedSpec& spec,
                                                        std::span<const Configuration> free_traj,
                                                        const Configuration& m0) {
  model.require_shape(m0);
  if (free_traj.size() != spec.steps_K)
    throw InvalidInput("discounted_action_gradient: expected steps_K free configurations");
  detail::DiscountedProblem P(model, spec, m0);
  std::vector<double> X(P.K * P.stride), G(P.K * P.stride);
  for (std::size_t k = 0; k < P.K; ++k) {
    m0.require_same_shape(free_traj[k]);
    std::copy(free_traj[k].values().begin(), free_traj[k].values().end(),
              X.begin() + static_cast<std::ptrdiff_t>(k * P.stride));
  }
  P.evaluate(X, G);
  std::vector<Covector> out;
  out.reserve(P.K);
  for (std::size_t k = 0; k < P.K; ++k)
    out.emplace_back(P.n, P.d,
                     std::vector<double>(G.begin() + static_cast<std::ptrdiff_t>(k * P.stride),
                                         G.begin() + static_cast<std::ptrdiff_t>((k + 1) * P.stride)));
  return out;
}

/**
 * Minimizes the truncated discrete action from m0. `warm`, when given,
 * initializes the free nodes (resampled onto this time grid and
 * translated to start at m0); otherwise see detail::initial_nodes.
 */
inline DiscountedSolution minimize_discounted(const TonelliModel& model, const DiscountedSpec& spec,
                                              const Configuration& m0,
                                              const Trajectory* warm = nullptr) {
  model.require_shape(m0);
  m0.require_finite();
  detail::DiscountedProblem P(model, spec, m0);
  const std::size_t total = P.K * P.stride;

  std::vector<double> X = detail::initial_nodes(P, warm);
  std::vector<double> g(total), z(total), dir(total), Xt(total), gt(total), zt(total);
  double S = P.evaluate(X, g);
  P.precondition_at(X, g, z);
  for (std::size_t k = 0; k < total; ++k) dir[k] = -z[k];
  double gz = P.dot(g, z);

  std::vector<double> history;
  constexpr double armijo = 1e-4;
  constexpr std::size_t restart_every = 50;
  constexpr double max_displacement = 0.25;
  constexpr int max_escapes = 8;
  std::size_t since_restart = 0;
  std::size_t iter = 0;
  int escapes = 0;

  auto gnorm = [&](std::span<const double> v) { return std::sqrt(P.dot(v, v)); };
  auto sup = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };
  auto restart_from = [&]() {
    S = P.evaluate(X, g);
    P.precondition_at(X, g, z);
    for (std::size_t k = 0; k < total; ++k) dir[k] = -z[k];
    gz = P.dot(g, z);
    since_restart = 0;
  };
  // Tries +-alpha y with alpha shrinking from the displacement cap.
  auto escape_saddle = [&]() {
    if (escapes >= max_escapes || !P.negative_curvature(X, gt)) return false;
    ++escapes;
    const double scale = max_displacement / std::max(sup(gt), 1e-300);
    const double min_gain = 1e-12 * (1.0 + std::abs(S));
    for (double alpha = scale; alpha > 1e-6 * scale; alpha *= 0.5)
      for (double sign : {1.0, -1.0}) {
        for (std::size_t k = 0; k < total; ++k) Xt[k] = X[k] + sign * alpha * gt[k];
        if (P.evaluate(Xt, {}) < S - min_gain) {
          X.swap(Xt);
          restart_from();
          return true;
        }
      }
    return false;
  };

  for (; iter < spec.max_iters; ++iter) {
    const double gn = gnorm(g);
    history.push_back(gn);
    if (gn <= spec.tol_grad) {
      if (escape_saddle()) continue;
      break;
    }

    double slope = P.dot(g, dir);
    if (!(slope < 0.0)) {
      for (std::size_t k = 0; k < total; ++k) dir[k] = -z[k];
      slope = -gz;
      since_restart = 0;
    }

    // Backtracking Armijo from the unit (Newton-scaled) step, then one
    // parabolic correction. When the function change is at round-off level
    // the approximate Wolfe test on the directional derivative decides.
    double alpha = std::min(1.0, max_displacement / std::max(sup(dir), 1e-300));
    double St = 0.0;
    bool accepted = false;
    const double round_off = 1e-10 * (1.0 + std::abs(S));
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t k = 0; k < total; ++k) Xt[k] = X[k] + alpha * dir[k];
      St = P.evaluate(Xt, {});
      if (St <= S + armijo * alpha * slope) {
        accepted = true;
        break;
      }
      if (std::abs(St - S) <= round_off) {
        P.evaluate(Xt, gt);
        const double slope_t = P.dot(gt, dir);
        if (slope_t >= 0.9 * slope && slope_t <= -0.8 * slope) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Function differences are at round-off: the slope no longer resolves.
      if (gn <= 100.0 * spec.tol_grad && since_restart == 0) break;
      if (since_restart == 0) break;
      for (std::size_t k = 0; k < total; ++k) dir[k] = -z[k];
      since_restart = 0;
      continue;
    }
    const double denom = 2.0 * (St - S - slope * alpha);
    if (denom > 0.0) {
      const double alpha_q = -slope * alpha * alpha / denom;
      if (alpha_q > 0.0 && std::abs(alpha_q - alpha) > 1e-3 * alpha && alpha_q < 4.0 * alpha) {
        for (std::size_t k = 0; k < total; ++k) gt[k] = X[k] + alpha_q * dir[k];
        const double Sq = P.evaluate(gt, {});
        if (Sq < St) {
          St = Sq;
          alpha = alpha_q;
          Xt.swap(gt);
        }
      }
    }

    X.swap(Xt);
    S = P.evaluate(X, gt);
    P.precondition_at(X, gt, zt);
    const double gz_new = P.dot(gt, zt);
    double beta = 0.0;
    if (++since_restart < restart_every) {
      double num = 0.0;
      for (std::size_t k = 0; k < total; ++k) num += gt[k] * (zt[k] - z[k]);
      num /= static_cast<double>(P.n);
      beta = std::max(0.0, num / gz);
    } else {
      since_restart = 0;
    }
    for (std::size_t k = 0; k < total; ++k) dir[k] = -zt[k] + beta * dir[k];
    g.swap(gt);
    z.swap(zt);
    gz = gz_new;
  }

  DiscountedSolution sol = detail::assemble_solution(P, spec, X, g, S, iter);
  if (sol.grad_norm > spec.tol_grad)
    throw DiscountedNonConvergence("discounted: gradient norm " + csv::format(sol.grad_norm) +
                                       " above tolerance after " + std::to_string(iter) +
                                       " iterations",
                                   std::move(history), std::move(sol));
  return sol;
}

/// grad V_eps(m0) at the computed minimizer: the exact derivative of the
/// discrete value with respect to x_0, -D_v L_c(x_0, v_0) + h D_x L_c(x_0, v_0).
inline Covector grad_V_eps(const DiscountedSolution& solution) { return solution.grad_V; }

struct DiscountedTemplate {
  double step_h = 0.1;
  double min_horizon = 0.0;
  double tol_grad = 1e-7;
  double value_tol = 1e-3;
  std::size_t max_iters = 5000;
};

struct SweepRow {
  double epsilon = 0.0;
  double value = 0.0;
  double eps_times_value = 0.0;
  double grad_norm = 0.0;
  double el_residual = 0.0;
  double tail_lo = 0.0;
  double tail_hi = 0.0;
};

struct HbarEstimate {
  double hbar = 0.0;
  std::vector<SweepRow> table;
};

/// Intercept at eps = 0 of the quadratic through the last three (eps, eps V) points.
inline double extrapolate_to_zero(std::span<const SweepRow> rows) {
  if (rows.size() < 3) throw InvalidInput("extrapolation needs at least three points");
  const auto* r = rows.data() + rows.size() - 3;
  double intercept = 0.0;
  for (int a = 0; a < 3; ++a) {
    double weight = 1.0;
    for (int b = 0; b < 3; ++b)
      if (b != a) weight *= (0.0 - r[b].epsilon) / (r[a].epsilon - r[b].epsilon);
    intercept += weight * r[a].eps_times_value;
  }
  return intercept;
}

inline DiscountedSpec spec_for(const TonelliModel& model, double eps, const DiscountedTemplate& t) {
  if (!(t.step_h > 0.0)) throw InvalidInput("discounted: step must be positive");
  if (!(eps > 0.0)) throw InvalidInput("discounted: epsilon must be positive");
  const double T_min = std::max(t.min_horizon, minimal_horizon(model, eps, t.value_tol));
  const auto K = static_cast<std::size_t>(std::max(1.0, std::ceil(T_min / t.step_h - 1e-9)));
  return DiscountedSpec::make(model, eps, static_cast<double>(K) * t.step_h, K, t.tol_grad,
                              t.value_tol, t.max_iters);
}

/**
 * Solves along the decreasing eps_list (warm starting each solve from the
 * previous one) and extrapolates eps V_eps = -Hbar + a eps + b eps^2 to eps = 0.
 */
inline HbarEstimate estimate_hbar_discounted(const TonelliModel& model, const Configuration& m0,
                                             std::span<const double> eps_list,
                                             const DiscountedTemplate& tmpl) {
  if (eps_list.size() < 3) throw InvalidInput("hbar sweep: need at least three epsilons");
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    if (!(eps_list[k] > 0.0)) throw InvalidInput("hbar sweep: epsilons must be positive");
    if (k > 0 && !(eps_list[k] < eps_list[k - 1]))
      throw InvalidInput("hbar sweep: epsilons must be strictly decreasing");
  }
  HbarEstimate est;
  std::optional<Trajectory> warm;
  for (double eps : eps_list) {
    const DiscountedSpec spec = spec_for(model, eps, tmpl);
    DiscountedSolution sol = minimize_discounted(model, spec, m0, warm ? &*warm : nullptr);
    est.table.push_back({eps, sol.value, eps * sol.value, sol.grad_norm, sol.el_residual,
                         sol.tail_lo, sol.tail_hi});
    warm = std::move(sol.trajectory);
  }
  est.hbar = -extrapolate_to_zero(est.table);
  return est;
}

/// epsilon, value, eps_times_value, grad_norm, el_residual, tail_lo, tail_hi
inline void write_sweep(std::ostream& os, std::span<const SweepRow> rows) {
  csv::write_header(os, {"epsilon", "value", "eps_times_value", "grad_norm", "el_residual",
                         "tail_lo", "tail_hi"});
  for (const auto& r : rows)
    csv::write_row(os, {r.epsilon, r.value, r.eps_times_value, r.grad_norm, r.el_residual,
                        r.tail_lo, r.tail_hi});
}

}  // namespace wkam
