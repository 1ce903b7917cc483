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

// Sampling auditor for the structural assumptions on L:
//   i    periodicity               L(M + Z, N) = L(M, N)
//   ii   rearrangement invariance  L(M.s, N.s) = L(M, N)
//   iii  L >= 0
//   v    L(M,N) <= C (1 + |M|^2 + |N|^2),  |L(M,0)| <= C
//   vi   |DL| <= C + C L
//   vii  second-order remainder >= gamma |H2|^2 - K_L |H1|^2
//   viii second-order remainder <= K |H2|^2 + K |H1|^2
// Norms are empirical; |DL| is the empirical dual norm of (D_x L, D_v L).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "wkam/config_space.hpp"
#include "wkam/model.hpp"

namespace wkam {

struct AssumptionViolation {
  std::string assumption;  ///< "i", "ii", "iii", "v", "vi", "vii", "viii"
  Configuration probe;
  double margin = 0.0;  ///< negative: how far the inequality failed
};

struct AssumptionReport {
  double gamma_lower = 0.5;
  /// Position curvature constant: sum over V and W modes of (2 pi |k|)^2 (|a|+|b|).
  double K_L_upper = 0.0;
  /// Constant used for viii. Must also dominate the kinetic curvature 1/2.
  double K_viii = 0.5;
  double C_upper = 0.0;
  /// min over H1 = 0 probes of remainder / |H2|^2, a sampled check of gamma.
  double gamma_observed = 0.0;
  std::size_t probes = 0;
  std::vector<AssumptionViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

namespace detail {

template <class Tag>
ParticleArray<Tag> random_array(std::mt19937_64& rng, std::size_t n, std::size_t d, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  ParticleArray<Tag> a(n, d);
  for (double& x : a.values()) x = u(rng);
  return a;
}

inline bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace detail

/**
 * Samples n_probes random (M, N, H1, H2) with entries in [-radius, radius]
 * over n_particles particles and checks the assumptions at the certified
 * constants. gamma = 1/2 is structural for the quadratic kinetic energy.
 */
inline AssumptionReport audit_assumptions(const TonelliModel& model, std::size_t n_probes,
                                          double radius, std::uint64_t seed,
                                          std::size_t n_particles = 4) {
  if (n_probes < 1) throw InvalidInput("audit: n_probes must be >= 1");
  if (!(radius > 0.0)) throw InvalidInput("audit: radius must be positive");

  AssumptionReport rep;
  const std::size_t d = model.dim();
  const auto& V = model.external();
  const auto& W = model.interaction();

  rep.gamma_lower = 0.5;
  rep.K_L_upper = V.curvature_bound() + W.curvature_bound();
  rep.K_viii = std::max(rep.K_L_upper, 0.5);
  const double sup_phi = V.sup_bound() + W.sup_bound();
  const double grad_phi = V.gradient_bound() + 2.0 * W.gradient_bound();
  rep.C_upper = std::max({0.5, sup_phi, grad_phi + 0.5, 1.0});
  rep.gamma_observed = std::numeric_limits<double>::infinity();

  std::mt19937_64 rng(seed);
  constexpr double round_off = 1e-12;
  const double C = rep.C_upper;
  Velocity zero_v(n_particles, d, 0.0);

  auto flag = [&](const char* id, const Configuration& m, double margin) {
    rep.violations.push_back({id, m, margin});
  };

  for (std::size_t probe = 0; probe < n_probes; ++probe) {
    auto m = detail::random_array<PositionTag>(rng, n_particles, d, radius);
    auto v = detail::random_array<VelocityTag>(rng, n_particles, d, radius);
    auto h1 = detail::random_array<PositionTag>(rng, n_particles, d, radius);
    auto h2 = detail::random_array<VelocityTag>(rng, n_particles, d, radius);

    const double L = eval_L(model, m, v);
    const double L0 = eval_L(model, m, zero_v);
    const double scale = 1.0 + std::abs(L);

    // iii
    if (L < -round_off * scale) flag("iii", m, L);
    if (L0 < -round_off * scale) flag("iii", m, L0);

    // v
    const double bound_v = C * (1.0 + norm_sq(m) + norm_sq(v));
    if (L > bound_v) flag("v", m, bound_v - L);
    if (std::abs(L0) > C) flag("v", m, C - std::abs(L0));

    // vi
    const auto g = grad_L(model, m, v);
    const double dl = std::sqrt(norm_sq(g.dx) + norm_sq(g.dv));
    if (dl > C + C * L + round_off * scale) flag("vi", m, C + C * L - dl);

    // vii / viii
    auto remainder = [&](const Configuration& dm, const Velocity& dv) {
      const double Lp = eval_L(model, m + dm, v + dv);
      return Lp - L - inner(g.dx, dm) - inner(g.dv, dv);
    };
    const double r = remainder(h1, h2);
    const double n1 = norm_sq(h1), n2 = norm_sq(h2);
    const double tol_r = round_off * (1.0 + std::abs(L) + n1 + n2) * 100.0;
    const double lower = rep.gamma_lower * n2 - rep.K_L_upper * n1;
    const double upper = rep.K_viii * (n1 + n2);
    if (r < lower - tol_r) flag("vii", m, r - lower);
    if (r > upper + tol_r) flag("viii", m, upper - r);

    const double r_vel = remainder(Configuration(n_particles, d, 0.0), h2);
    if (n2 > 0.0) rep.gamma_observed = std::min(rep.gamma_observed, r_vel / n2);

    // i: integer shift of every coordinate
    std::uniform_int_distribution<long> zdist(-3, 3);
    std::vector<long> zs(n_particles * d);
    for (long& z : zs) z = zdist(rng);
    const double L_shift = eval_L(model, shift(m, IntegerShift(n_particles, d, zs)), v);
    if (!detail::close(L_shift, L, round_off)) flag("i", m, -std::abs(L_shift - L));

    // ii: random relabeling
    std::vector<std::size_t> idx(n_particles);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const Permutation sigma(idx);
    const double L_perm = eval_L(model, permute(m, sigma), permute(v, sigma));
    if (!detail::close(L_perm, L, round_off)) flag("ii", m, -std::abs(L_perm - L));
  }
  rep.probes = n_probes;
  return rep;
}

}  // namespace wkam
