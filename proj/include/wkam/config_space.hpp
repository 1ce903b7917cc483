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

// Torus geometry and the quotient metric on configurations modulo particle
// relabeling and per-particle integer translation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wkam/assignment.hpp"
#include "wkam/errors.hpp"
#include "wkam/particle_array.hpp"

namespace wkam {

/// Per-particle integer translation (an element of L^2_Z).
class IntegerShift {
 public:
  IntegerShift(std::size_t n_particles, std::size_t dim, std::vector<long> shifts)
      : n_(n_particles), d_(dim), shifts_(std::move(shifts)) {
    if (shifts_.size() != n_ * d_) throw InvalidInput("integer shift: wrong size");
  }

  std::size_t n_particles() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  long operator()(std::size_t i, std::size_t j) const { return shifts_[i * d_ + j]; }

 private:
  std::size_t n_, d_;
  std::vector<long> shifts_;
};

/// A bijection of {0..N-1}; the finite stand-in for measure-preserving
/// rearrangements of I.
class Permutation {
 public:
  explicit Permutation(std::vector<std::size_t> perm) : perm_(std::move(perm)) {
    std::vector<char> seen(perm_.size(), 0);
    for (std::size_t k : perm_) {
      if (k >= perm_.size() || seen[k]) throw InvalidInput("permutation: not a bijection");
      seen[k] = 1;
    }
  }

  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    return Permutation(std::move(p));
  }

  std::size_t size() const noexcept { return perm_.size(); }
  std::size_t operator[](std::size_t i) const { return perm_[i]; }
  const std::vector<std::size_t>& indices() const noexcept { return perm_; }

 private:
  std::vector<std::size_t> perm_;
};

/// (a . sigma)_i = a_{sigma(i)}
template <class Tag>
ParticleArray<Tag> permute(const ParticleArray<Tag>& a, const Permutation& sigma) {
  if (sigma.size() != a.n_particles()) throw InvalidInput("permute: size mismatch");
  ParticleArray<Tag> out(a.n_particles(), a.dim());
  for (std::size_t i = 0; i < a.n_particles(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) out(i, j) = a(sigma[i], j);
  return out;
}

inline Configuration shift(const Configuration& a, const IntegerShift& z) {
  if (z.n_particles() != a.n_particles() || z.dim() != a.dim())
    throw InvalidInput("shift: shape mismatch");
  Configuration out = a;
  for (std::size_t i = 0; i < a.n_particles(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) out(i, j) += static_cast<double>(z(i, j));
  return out;
}

/// Canonical representative modulo L^2_Z: every coordinate in [0, 1).
inline Configuration wrap(const Configuration& cfg) {
  cfg.require_finite();
  Configuration out = cfg;
  for (double& x : out.values()) {
    x -= std::floor(x);
    if (x >= 1.0) x = 0.0;  // x slightly below an integer can round up to 1
  }
  return out;
}

/// Difference of two lifts reduced to its nearest-integer representative in
/// (-1/2, 1/2]. An exact half is sent to +1/2.
inline double nearest_lift_offset(double delta) {
  return delta - std::ceil(delta - 0.5);
}

/// sum_j min_k (x_j - y_j - k)^2, in [0, d/4].
inline double torus_sq_dist(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("torus_sq_dist: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!std::isfinite(x[j]) || !std::isfinite(y[j]))
      throw InvalidInput("torus_sq_dist: non-finite input");
    const double r = nearest_lift_offset(x[j] - y[j]);
    s += r * r;
  }
  return s;
}

struct WeakDistance {
  double distance = 0.0;
  /// particle i of `a` is matched with particle matching[i] of `b`
  std::vector<std::size_t> matching;
};

/**
 * dist_weak(a, b) = sqrt(min_sigma (1/N) sum_i |a_i - b_sigma(i)|_T^2).
 *
 * The infimum over integer shifts decouples per particle and is absorbed in
 * the torus cost; the infimum over rearrangements of equal-weight samples is
 * an assignment problem. The value equals the 2-Wasserstein distance on T^d
 * between the two empirical measures.
 */
inline WeakDistance dist_weak_matching(const Configuration& a, const Configuration& b) {
  if (!a.same_shape(b))
    throw InvalidInput("dist_weak: configurations differ in particle count or dimension");
  a.require_finite();
  b.require_finite();
  const std::size_t n = a.n_particles();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) cost[i * n + k] = torus_sq_dist(a.row(i), b.row(k));
  Assignment asg = solve_assignment(cost, n);
  return {std::sqrt(std::max(0.0, asg.cost / static_cast<double>(n))), std::move(asg.cols)};
}

inline double dist_weak(const Configuration& a, const Configuration& b) {
  return dist_weak_matching(a, b).distance;
}

inline bool is_equivalent(const Configuration& a, const Configuration& b, double tol) {
  return dist_weak(a, b) <= tol;
}

}  // namespace wkam
