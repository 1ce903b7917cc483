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
 * Mechanical Tonelli Lagrangians on N-particle configurations.
 *
 *   L(M, N)   = 1/2 <N, N> - (1/N) sum_i V(x_i) - (1/N^2) sum_ij W(x_i - x_j)
 *   L_c(M, N) = L(M, N) + c . mean(N)
 *
 * Sign convention, used everywhere in the library:
 *
 *   H(M, P)   = sup_N { -<P, N> - L(M, N) } = 1/2 <P, P> + Phi(M)
 *   H_c(M, P) = H(M, P + c)
 *   P = -D_v L_c(M, N),   N = -D_p H_c(M, P)
 *
 * where Phi(M) = (1/N) sum V + (1/N^2) sum W is the potential energy. With this
 * convention the velocity of a phase point is v = -(p + c). All gradients are
 * taken with respect to the empirical inner product <A, B> = (1/N) sum A_i.B_i,
 * so D_v L = v rather than v / N.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "wkam/errors.hpp"
#include "wkam/particle_array.hpp"
#include "wkam/trig_potential.hpp"

namespace wkam {

class TonelliModel {
 public:
  TonelliModel() = default;

  TonelliModel(TrigPotential external, TrigPotential interaction, std::vector<double> c)
      : dim_(external.dim()),
        external_(std::move(external)),
        interaction_(std::move(interaction)),
        c_(std::move(c)) {
    if (interaction_.dim() != dim_) throw InvalidInput("model: V and W dimensions differ");
    if (c_.size() != dim_) throw InvalidInput("model: c has wrong length");
    for (double x : c_)
      if (!std::isfinite(x)) throw InvalidInput("model: non-finite c");
  }

  std::size_t dim() const noexcept { return dim_; }
  const TrigPotential& external() const noexcept { return external_; }
  const TrigPotential& interaction() const noexcept { return interaction_; }
  const std::vector<double>& c() const noexcept { return c_; }

  double c_norm_sq() const {
    double s = 0.0;
    for (double x : c_) s += x * x;
    return s;
  }

  TonelliModel with_c(std::vector<double> c) const {
    return TonelliModel(external_, interaction_, std::move(c));
  }

  void require_shape(const auto& a) const {
    if (a.dim() != dim_)
      throw InvalidInput("model: array dimension " + std::to_string(a.dim()) +
                         " != model dimension " + std::to_string(dim_));
  }

  /// Phi(M) = (1/N) sum_i V(x_i) + (1/N^2) sum_ij W(x_i - x_j)
  double potential_energy(const Configuration& m) const {
    require_shape(m);
    const std::size_t n = m.n_particles();
    double ext = 0.0;
    for (std::size_t i = 0; i < n; ++i) ext += external_(m.row(i));
    double inter = 0.0;
    if (!interaction_.empty()) {
      std::vector<double> diff(dim_);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          for (std::size_t k = 0; k < dim_; ++k) diff[k] = m(i, k) - m(j, k);
          inter += interaction_(diff);
        }
    }
    const double nn = static_cast<double>(n);
    return ext / nn + inter / (nn * nn);
  }

  /// Empirical gradient of Phi:
  /// grad_i = grad V(x_i) + (1/N) sum_j [grad W(x_i - x_j) - grad W(x_j - x_i)]
  Covector potential_gradient(const Configuration& m) const {
    require_shape(m);
    const std::size_t n = m.n_particles();
    Covector g(n, dim_);
    std::vector<double> buf(dim_), diff(dim_);
    for (std::size_t i = 0; i < n; ++i) {
      external_.gradient(m.row(i), buf);
      for (std::size_t k = 0; k < dim_; ++k) g(i, k) = buf[k];
    }
    if (!interaction_.empty()) {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;  // self terms cancel exactly
          for (std::size_t k = 0; k < dim_; ++k) diff[k] = m(i, k) - m(j, k);
          interaction_.gradient(diff, buf);
          // grad W(x_i - x_j) counted once for pair (i,j) and once, negated,
          // for the mirrored pair (j,i): -grad W(x_j - x_i) at particle i.
          for (std::size_t k = 0; k < dim_; ++k) g(i, k) += inv_n * buf[k];
          for (std::size_t k = 0; k < dim_; ++k) g(j, k) -= inv_n * buf[k];
        }
    }
    return g;
  }

  /// sup |L(., 0)| <= sup|V| + sup|W| (the constant of |L(M,0)| <= C).
  double zero_velocity_bound() const { return external_.sup_bound() + interaction_.sup_bound(); }

  /// cbar >= 0 with L_c >= -cbar everywhere:
  /// v^2/2 + c.v >= -|c|^2/2 and -Phi >= -(max V)_+ - (max W)_+.
  double lower_shift() const {
    const double vmax = external_.grid_extrema().second;
    const double wmax = interaction_.grid_extrema().second;
    return 0.5 * c_norm_sq() + std::max(0.0, vmax) + std::max(0.0, wmax);
  }

  /// Upper bound for sup Phi - inf Phi.
  double potential_range() const {
    auto [vlo, vhi] = external_.grid_extrema();
    auto [wlo, whi] = interaction_.grid_extrema();
    return (vhi - vlo) + (whi - wlo);
  }

 private:
  std::size_t dim_ = 1;
  TrigPotential external_ = TrigPotential::zero(1);
  TrigPotential interaction_ = TrigPotential::zero(1);
  std::vector<double> c_ = {0.0};
};

/// Builds the default mechanical model and checks V <= 0 and W <= 0 on a fine
/// grid, which is what makes L >= 0.
inline TonelliModel make_mechanical_model(TrigPotential external, TrigPotential interaction,
                                          std::vector<double> c) {
  constexpr double slack = 1e-12;
  if (external.grid_extrema().second > slack)
    throw UnsupportedModel("external potential V is positive somewhere; L >= 0 fails");
  if (interaction.grid_extrema().second > slack)
    throw UnsupportedModel("interaction potential W is positive somewhere; L >= 0 fails");
  return TonelliModel(std::move(external), std::move(interaction), std::move(c));
}

inline TonelliModel free_model(std::size_t dim, std::vector<double> c) {
  return TonelliModel(TrigPotential::zero(dim), TrigPotential::zero(dim), std::move(c));
}

/// V(x) = -(1 - cos 2 pi x) per axis, W = 0.
inline TonelliModel cosine_model(std::size_t dim, std::vector<double> c) {
  return TonelliModel(TrigPotential::cosine_well(dim), TrigPotential::zero(dim), std::move(c));
}

struct LagrangianGradient {
  Covector dx;
  Covector dv;
};

struct HamiltonianGradient {
  Covector dx;
  Covector dp;
};

inline double eval_L(const TonelliModel& model, const Configuration& m, const Velocity& v) {
  model.require_shape(m);
  m.require_same_shape(v);
  return 0.5 * norm_sq(v) - model.potential_energy(m);
}

inline double eval_Lc(const TonelliModel& model, const Configuration& m, const Velocity& v) {
  const double base = eval_L(model, m, v);
  const auto vbar = mean(v);
  double lin = 0.0;
  for (std::size_t j = 0; j < vbar.size(); ++j) lin += model.c()[j] * vbar[j];
  return base + lin;
}

inline LagrangianGradient grad_L(const TonelliModel& model, const Configuration& m,
                                 const Velocity& v) {
  model.require_shape(m);
  m.require_same_shape(v);
  return {-model.potential_gradient(m), retag<MomentumTag>(v)};
}

/// D_x L_c = D_x L,  D_v L_c = v + c
inline LagrangianGradient grad_Lc(const TonelliModel& model, const Configuration& m,
                                  const Velocity& v) {
  LagrangianGradient g = grad_L(model, m, v);
  for (std::size_t i = 0; i < g.dv.n_particles(); ++i)
    for (std::size_t j = 0; j < g.dv.dim(); ++j) g.dv(i, j) += model.c()[j];
  return g;
}

/// H(M, P) = 1/2 <P, P> + Phi(M); the maximizing velocity is N = -P.
inline double eval_H(const TonelliModel& model, const Configuration& m, const Momentum& p) {
  model.require_shape(m);
  m.require_same_shape(p);
  return 0.5 * norm_sq(p) + model.potential_energy(m);
}

inline Momentum shift_by_c(const TonelliModel& model, Momentum p) {
  for (std::size_t i = 0; i < p.n_particles(); ++i)
    for (std::size_t j = 0; j < p.dim(); ++j) p(i, j) += model.c()[j];
  return p;
}

inline double eval_Hc(const TonelliModel& model, const Configuration& m, const Momentum& p) {
  return eval_H(model, m, shift_by_c(model, p));
}

/// D_p H = P, D_x H = -D_x L(M, -D_p H) = grad Phi.
inline HamiltonianGradient grad_H(const TonelliModel& model, const Configuration& m,
                                  const Momentum& p) {
  model.require_shape(m);
  m.require_same_shape(p);
  return {model.potential_gradient(m), p};
}

inline HamiltonianGradient grad_Hc(const TonelliModel& model, const Configuration& m,
                                   const Momentum& p) {
  return grad_H(model, m, shift_by_c(model, p));
}

/// v = -D_p H_c(M, P) = -(P + c)
inline Velocity velocity_of(const TonelliModel& model, const Momentum& p) {
  return retag<VelocityTag>(-shift_by_c(model, p));
}

/// P = -D_v L_c(M, v) = -(v + c)
inline Momentum momentum_of(const TonelliModel& model, const Velocity& v) {
  return -shift_by_c(model, retag<MomentumTag>(v));
}

}  // namespace wkam
