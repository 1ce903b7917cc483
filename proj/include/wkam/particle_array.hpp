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

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wkam/errors.hpp"

namespace wkam {

/**
 * An N x d array of reals, one row per particle: the N-sample discretization
 * of a random variable in L^2(I; R^d). Every sample carries weight 1/N, so
 * the Lebesgue integral over I becomes the empirical mean.
 *
 * The tag distinguishes positions from velocities and momenta so they cannot
 * be mixed by accident; use retag() where a conversion is meant.
 */
template <class Tag>
class ParticleArray {
 public:
  ParticleArray() = default;

  ParticleArray(std::size_t n_particles, std::size_t dim, double fill = 0.0)
      : n_(n_particles), d_(dim), data_(n_particles * dim, fill) {
    check_shape();
  }

  ParticleArray(std::size_t n_particles, std::size_t dim, std::vector<double> values)
      : n_(n_particles), d_(dim), data_(std::move(values)) {
    check_shape();
    if (data_.size() != n_ * d_) {
      throw InvalidInput("particle array: expected " + std::to_string(n_ * d_) +
                         " values, got " + std::to_string(data_.size()));
    }
    require_finite();
  }

  /// Rows are particles. All rows must have the same length.
  static ParticleArray from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw InvalidInput("particle array: no rows");
    const std::size_t d = rows.begin()->size();
    std::vector<double> values;
    values.reserve(rows.size() * d);
    for (const auto& row : rows) {
      if (row.size() != d) throw InvalidInput("particle array: ragged rows");
      values.insert(values.end(), row.begin(), row.end());
    }
    return ParticleArray(rows.size(), d, std::move(values));
  }

  std::size_t n_particles() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * d_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * d_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * d_, d_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const auto& other) const noexcept {
    return n_ == other.n_particles() && d_ == other.dim();
  }

  bool all_finite() const noexcept {
    for (double x : data_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void require_finite() const {
    if (!all_finite()) throw InvalidInput("particle array: non-finite entry");
  }

  ParticleArray& operator+=(const ParticleArray& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  ParticleArray& operator-=(const ParticleArray& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  ParticleArray& operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
  }

  /// this += s * o
  ParticleArray& axpy(double s, const auto& o) {
    require_same_shape(o);
    auto ov = o.values();
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * ov[k];
    return *this;
  }

  friend ParticleArray operator+(ParticleArray a, const ParticleArray& b) { return a += b; }
  friend ParticleArray operator-(ParticleArray a, const ParticleArray& b) { return a -= b; }
  friend ParticleArray operator*(double s, ParticleArray a) { return a *= s; }
  friend ParticleArray operator-(ParticleArray a) { return a *= -1.0; }

  friend bool operator==(const ParticleArray&, const ParticleArray&) = default;

  void require_same_shape(const auto& o) const {
    if (!same_shape(o)) {
      throw InvalidInput("particle array: shape mismatch (" + std::to_string(n_) + "x" +
                         std::to_string(d_) + " vs " + std::to_string(o.n_particles()) + "x" +
                         std::to_string(o.dim()) + ")");
    }
  }

 private:
  void check_shape() const {
    if (n_ < 1 || d_ < 1) throw InvalidInput("particle array: n_particles and dim must be >= 1");
  }

  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> data_;
};

struct PositionTag {};
struct VelocityTag {};
struct MomentumTag {};

using Configuration = ParticleArray<PositionTag>;
using Velocity = ParticleArray<VelocityTag>;
/// Momenta double as covectors: every gradient in the library is the Riesz
/// representative under the empirical inner product.
using Momentum = ParticleArray<MomentumTag>;
using Covector = Momentum;

template <class To, class From>
ParticleArray<To> retag(const ParticleArray<From>& a) {
  return ParticleArray<To>(a.n_particles(), a.dim(),
                           std::vector<double>(a.values().begin(), a.values().end()));
}

/// <A,B> = (1/N) sum_i A_i . B_i
template <class A, class B>
double inner(const ParticleArray<A>& a, const ParticleArray<B>& b) {
  a.require_same_shape(b);
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return s / static_cast<double>(a.n_particles());
}

template <class A>
double norm_sq(const ParticleArray<A>& a) {
  return inner(a, a);
}

template <class A>
double norm(const ParticleArray<A>& a) {
  return std::sqrt(norm_sq(a));
}

/// Per-component mean over particles.
template <class A>
std::vector<double> mean(const ParticleArray<A>& a) {
  std::vector<double> m(a.dim(), 0.0);
  for (std::size_t i = 0; i < a.n_particles(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m[j] += a(i, j);
  for (double& x : m) x /= static_cast<double>(a.n_particles());
  return m;
}

}  // namespace wkam
