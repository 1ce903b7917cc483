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

// Independent one-dimensional oracle for the effective Hamiltonian of
// H(x, p) = p^2/2 + V(x) on the circle:
//
//   Hbar(c) = max V                  if |c| <= c* = int_0^1 sqrt(2 (max V - V)),
//   int_0^1 sqrt(2 (Hbar - V)) = |c| otherwise.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

#include "wkam/errors.hpp"
#include "wkam/trig_potential.hpp"

namespace wkam {

namespace detail {

/// argmax and max of V on [0, 1): grid scan, then golden-section polish.
inline std::pair<double, double> argmax_1d(const TrigPotential& V) {
  constexpr int n = 8192;
  double best_x = 0.0, best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / n;
    const double v = V(std::span<const double>(&x, 1));
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  double a = best_x - 1.0 / n, b = best_x + 1.0 / n;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto f = [&](double x) { return V(std::span<const double>(&x, 1)); };
  for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
    const double x1 = b - g * (b - a), x2 = a + g * (b - a);
    if (f(x1) > f(x2)) b = x2;
    else a = x1;
  }
  const double x = 0.5 * (a + b);
  return f(x) > best ? std::pair{x, f(x)} : std::pair{best_x, best};
}

/// int over one period of sqrt(2 (E - V)), split at the maximizer so that
/// the square-root cusp at E = max V sits on the interval ends.
inline double action_integral(const TrigPotential& V, double E, double x_max) {
  auto integrand = [&](double x) {
    const double gap = E - V(std::span<const double>(&x, 1));
    return std::sqrt(2.0 * std::max(0.0, gap));
  };
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(integrand, x_max, x_max + 1.0, 20, 1e-14);
}

inline void require_oracle_model(const TrigPotential& V) {
  if (V.dim() != 1) throw UnsupportedModel("oracle: only d = 1 is supported");
  if (V.grid_extrema().second > 1e-12)
    throw UnsupportedModel("oracle: V must be <= 0 everywhere");
}

}  // namespace detail

/// c* = int_0^1 sqrt(2 (max V - V(x))) dx
inline double critical_c(const TrigPotential& V) {
  detail::require_oracle_model(V);
  const auto [xm, vm] = detail::argmax_1d(V);
  return detail::action_integral(V, vm, xm);
}

inline double oracle_hbar_1d(const TrigPotential& V, double c) {
  detail::require_oracle_model(V);
  if (!std::isfinite(c)) throw InvalidInput("oracle: c must be finite");
  const auto [xm, vm] = detail::argmax_1d(V);
  const double target = std::abs(c);
  if (target <= detail::action_integral(V, vm, xm)) return vm;
  // The action integral is increasing in E and at E = vm + c^2/2 it already
  // exceeds |c| since E - V >= c^2/2 there.
  double lo = vm, hi = vm + 0.5 * c * c;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (detail::action_integral(V, mid, xm) < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace wkam
