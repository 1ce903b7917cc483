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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wkam/errors.hpp"

namespace wkam {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct TrigMode {
  std::vector<int> k;  ///< integer wavevector, length d
  double a = 0.0;      ///< cosine coefficient
  double b = 0.0;      ///< sine coefficient
};

/// x -> sum_modes a cos(2 pi k.x) + b sin(2 pi k.x), periodic on T^d.
class TrigPotential {
 public:
  TrigPotential() = default;

  TrigPotential(std::size_t dim, std::vector<TrigMode> modes) : dim_(dim), modes_(std::move(modes)) {
    if (dim_ < 1) throw InvalidInput("trig potential: dim must be >= 1");
    for (const auto& m : modes_) {
      if (m.k.size() != dim_) throw InvalidInput("trig potential: wavevector length != dim");
      if (!std::isfinite(m.a) || !std::isfinite(m.b))
        throw InvalidInput("trig potential: non-finite coefficient");
    }
  }

  static TrigPotential zero(std::size_t dim) { return TrigPotential(dim, {}); }

  /// sum_j -amplitude (1 - cos 2 pi x_j). Maximum 0 at the lattice points.
  static TrigPotential cosine_well(std::size_t dim, double amplitude = 1.0) {
    std::vector<TrigMode> modes;
    modes.push_back({std::vector<int>(dim, 0), -amplitude * static_cast<double>(dim), 0.0});
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<int> k(dim, 0);
      k[j] = 1;
      modes.push_back({std::move(k), amplitude, 0.0});
    }
    return TrigPotential(dim, std::move(modes));
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<TrigMode>& modes() const noexcept { return modes_; }
  bool empty() const noexcept { return modes_.empty(); }

  double operator()(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& m : modes_) {
      const double ph = two_pi * phase(m, x);
      s += m.a * std::cos(ph) + m.b * std::sin(ph);
    }
    return s;
  }

  /// Writes grad V(x) into out (length d).
  void gradient(std::span<const double> x, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& m : modes_) {
      const double ph = two_pi * phase(m, x);
      const double f = two_pi * (-m.a * std::sin(ph) + m.b * std::cos(ph));
      for (std::size_t j = 0; j < dim_; ++j) out[j] += f * m.k[j];
    }
  }

  /// Writes the d x d Hessian (row major) into out.
  void hessian(std::span<const double> x, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (const auto& m : modes_) {
      const double ph = two_pi * phase(m, x);
      const double f = -two_pi * two_pi * (m.a * std::cos(ph) + m.b * std::sin(ph));
      for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j < dim_; ++j) out[i * dim_ + j] += f * m.k[i] * m.k[j];
    }
  }

  /// sup |V| <= sum (|a| + |b|)
  double sup_bound() const {
    double s = 0.0;
    for (const auto& m : modes_) s += std::abs(m.a) + std::abs(m.b);
    return s;
  }

  /// sup |grad V| <= 2 pi sum |k| (|a| + |b|)
  double gradient_bound() const {
    double s = 0.0;
    for (const auto& m : modes_) s += std::sqrt(k_sq(m)) * (std::abs(m.a) + std::abs(m.b));
    return two_pi * s;
  }

  /// sup ||D^2 V|| <= (2 pi)^2 sum |k|^2 (|a| + |b|)
  double curvature_bound() const {
    double s = 0.0;
    for (const auto& m : modes_) s += k_sq(m) * (std::abs(m.a) + std::abs(m.b));
    return two_pi * two_pi * s;
  }

  /// Minimum and maximum over a uniform grid of T^d.
  std::pair<double, double> grid_extrema(std::size_t points_per_axis = 0) const {
    if (modes_.empty()) return {0.0, 0.0};
    if (points_per_axis == 0) points_per_axis = dim_ == 1 ? 4096 : dim_ == 2 ? 256 : 40;
    std::size_t total = 1;
    for (std::size_t j = 0; j < dim_; ++j) total *= points_per_axis;
    std::vector<double> x(dim_);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t r = flat;
      for (std::size_t j = 0; j < dim_; ++j) {
        x[j] = static_cast<double>(r % points_per_axis) / static_cast<double>(points_per_axis);
        r /= points_per_axis;
      }
      const double v = (*this)(x);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return {lo, hi};
  }

 private:
  static double phase(const TrigMode& m, std::span<const double> x) {
    double p = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) p += m.k[j] * x[j];
    return p;
  }

  static double k_sq(const TrigMode& m) {
    double s = 0.0;
    for (int kj : m.k) s += static_cast<double>(kj) * kj;
    return s;
  }

  std::size_t dim_ = 1;
  std::vector<TrigMode> modes_;
};

}  // namespace wkam
