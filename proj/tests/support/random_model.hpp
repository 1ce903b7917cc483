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
#include <random>
#include <vector>

#include "wkam/model.hpp"

namespace wkam::testing {

/// -sum_m A_m (1 - cos(2 pi k_m.x + phi_m)) with A_m >= 0, so the result is
/// <= 0 everywhere and has both cosine and sine coefficients.
inline TrigPotential random_nonpositive(std::mt19937_64& rng, std::size_t dim, int modes,
                                        double scale = 0.5) {
  std::uniform_real_distribution<double> amp(0.05, scale), phase(0.0, two_pi);
  std::uniform_int_distribution<int> kd(-2, 2);
  std::vector<TrigMode> out;
  double total = 0.0;
  for (int m = 0; m < modes; ++m) {
    std::vector<int> k(dim);
    bool nonzero = false;
    while (!nonzero) {
      for (auto& x : k) x = kd(rng);
      for (int x : k) nonzero = nonzero || x != 0;
    }
    const double A = amp(rng), phi = phase(rng);
    out.push_back({k, A * std::cos(phi), -A * std::sin(phi)});
    total += A;
  }
  out.push_back({std::vector<int>(dim, 0), -total, 0.0});
  return TrigPotential(dim, std::move(out));
}

inline TonelliModel random_model(std::mt19937_64& rng, std::size_t dim, bool with_interaction = true) {
  std::uniform_real_distribution<double> cu(-1.0, 1.0);
  std::vector<double> c(dim);
  for (double& x : c) x = cu(rng);
  return make_mechanical_model(random_nonpositive(rng, dim, 3),
                               with_interaction ? random_nonpositive(rng, dim, 2, 0.3)
                                                : TrigPotential::zero(dim),
                               c);
}

template <class Tag>
ParticleArray<Tag> random_array(std::mt19937_64& rng, std::size_t n, std::size_t d, double lo = -1.0,
                                double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  ParticleArray<Tag> a(n, d);
  for (double& x : a.values()) x = u(rng);
  return a;
}

}  // namespace wkam::testing
