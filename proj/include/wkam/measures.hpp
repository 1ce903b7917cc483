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

// Empirical invariant measures from Birkhoff averages, tested against a family
// of observables that are invariant under relabeling and integer shifts.

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "wkam/calibration.hpp"
#include "wkam/cell_solver.hpp"
#include "wkam/csv.hpp"
#include "wkam/errors.hpp"
#include "wkam/flow.hpp"
#include "wkam/model.hpp"
#include "wkam/parallel.hpp"

namespace wkam {

class Observable {
 public:
  enum class Kind { fourier_position, velocity_moment, lagrangian_Lc, energy_H };

  /// (1/N) sum_i cos(2 pi k.x_i), or sin when `sine`.
  static Observable fourier_position(std::vector<int> k, bool sine = false) {
    Observable o(Kind::fourier_position);
    o.k_ = std::move(k);
    o.sine_ = sine;
    return o;
  }

  /// (1/N) sum_i v_ij^order, v = -(p + c), order 1 or 2.
  static Observable velocity_moment(int order, std::size_t component = 0) {
    if (order != 1 && order != 2) throw InvalidInput("velocity_moment: order must be 1 or 2");
    Observable o(Kind::velocity_moment);
    o.order_ = order;
    o.component_ = component;
    return o;
  }

  static Observable lagrangian_Lc() { return Observable(Kind::lagrangian_Lc); }
  static Observable energy_H() { return Observable(Kind::energy_H); }

  Kind kind() const noexcept { return kind_; }

  std::string name() const {
    switch (kind_) {
      case Kind::fourier_position: {
        std::string s = sine_ ? "sin(k=" : "cos(k=";
        for (std::size_t j = 0; j < k_.size(); ++j) s += (j ? "," : "") + std::to_string(k_[j]);
        return s + ")";
      }
      case Kind::velocity_moment:
        return "v" + std::to_string(component_) + "^" + std::to_string(order_);
      case Kind::lagrangian_Lc:
        return "L_c";
      case Kind::energy_H:
        return "H_c";
    }
    return "?";
  }

  double operator()(const TonelliModel& model, const PhasePoint& z) const {
    const std::size_t n = z.m.n_particles(), d = z.m.dim();
    switch (kind_) {
      case Kind::fourier_position: {
        if (k_.size() != d) throw InvalidInput("fourier observable: wavevector length != dim");
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double ph = 0.0;
          for (std::size_t j = 0; j < d; ++j) ph += k_[j] * z.m(i, j);
          s += sine_ ? std::sin(two_pi * ph) : std::cos(two_pi * ph);
        }
        return s / static_cast<double>(n);
      }
      case Kind::velocity_moment: {
        if (component_ >= d) throw InvalidInput("velocity observable: component out of range");
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double v = -(z.p(i, component_) + model.c()[component_]);
          s += order_ == 1 ? v : v * v;
        }
        return s / static_cast<double>(n);
      }
      case Kind::lagrangian_Lc:
        return eval_Lc(model, z.m, velocity_of(model, z.p));
      case Kind::energy_H:
        return eval_Hc(model, z.m, z.p);
    }
    return 0.0;
  }

 private:
  explicit Observable(Kind k) : kind_(k) {}

  Kind kind_;
  std::vector<int> k_;
  bool sine_ = false;
  int order_ = 1;
  std::size_t component_ = 0;
};

/// The six observables used by the standard invariance check in dimension d.
inline std::vector<Observable> standard_observables(std::size_t d) {
  std::vector<int> e1(d, 0);
  e1[0] = 1;
  std::vector<int> e2(d, 0);
  e2[0] = 2;
  return {Observable::fourier_position(e1), Observable::fourier_position(e1, true),
          Observable::fourier_position(e2), Observable::velocity_moment(1),
          Observable::velocity_moment(2), Observable::lagrangian_Lc()};
}

struct EmpiricalMeasure {
  std::vector<PhasePoint> atoms;
  std::vector<double> weights;
  std::vector<double> times;  ///< flow time of each atom
  double t_span = 0.0;        ///< length of the averaging window
  PhasePoint end;             ///< flow state at t_span (for telescoping checks)

  std::size_t size() const noexcept { return atoms.size(); }

  double expectation(const TonelliModel& model, const Observable& F) const {
    double s = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) s += weights[k] * F(model, atoms[k]);
    return s;
  }
};

/// Dirac mass at the rest point (x, p = -c).
inline EmpiricalMeasure rest_point_measure(const TonelliModel& model, const Configuration& x) {
  model.require_shape(x);
  Momentum p(x.n_particles(), x.dim());
  for (std::size_t i = 0; i < p.n_particles(); ++i)
    for (std::size_t j = 0; j < p.dim(); ++j) p(i, j) = -model.c()[j];
  EmpiricalMeasure mu;
  mu.atoms = {PhasePoint{x, p}};
  mu.weights = {1.0};
  mu.times = {0.0};
  mu.end = mu.atoms.front();
  return mu;
}

/**
 * Uniformly weighted flow samples start, Phi(thin h), Phi(2 thin h), ... up to
 * t_total (exclusive). A start whose phase speed is below 1e-10 is a rest
 * point and yields repeated copies of itself.
 */
inline EmpiricalMeasure birkhoff_measure(const TonelliModel& model, const PhasePoint& start,
                                         double t_total, double h, std::size_t thin) {
  if (!(h > 0.0)) throw InvalidInput("birkhoff: h must be positive");
  if (thin < 1) throw InvalidInput("birkhoff: thin must be >= 1");
  if (!(t_total >= 100.0 * h)) throw InvalidInput("birkhoff: t_total must be >= 100 h");
  detail::require_phase_point(model, start);
  const auto n = static_cast<std::size_t>(std::llround(t_total / h));
  const std::size_t samples = (n + thin - 1) / thin;
  const bool stationary = detail::phase_speed(model, start) <= 1e-10;

  EmpiricalMeasure mu;
  mu.t_span = static_cast<double>(n) * h;
  mu.atoms.reserve(samples);
  PhasePoint z = start;
  for (std::size_t k = 0; k < n; ++k) {
    if (k % thin == 0) {
      mu.atoms.push_back(z);
      mu.times.push_back(static_cast<double>(k) * h);
    }
    if (!stationary) {
      detail::verlet_step(model, z, h);
      if (!z.m.all_finite() || !z.p.all_finite())
        throw IntegrationFailure("birkhoff: state became non-finite", k + 1);
    }
  }
  mu.end = z;
  mu.weights.assign(mu.atoms.size(), 1.0 / static_cast<double>(mu.atoms.size()));
  return mu;
}

struct InvarianceReport {
  std::vector<std::string> names;
  std::vector<double> residuals;  ///< |E[F o Phi_t] - E[F]|
  std::vector<double> bounds;     ///< t_test osc(F) / t_span, when t_span > 0
  double max_residual = 0.0;
};

inline InvarianceReport check_invariance(const TonelliModel& model, const EmpiricalMeasure& mu,
                                         double t_test, double h,
                                         const std::vector<Observable>& observables,
                                         unsigned threads = 1) {
  if (mu.atoms.empty()) throw InvalidInput("check_invariance: empty measure");
  std::vector<PhasePoint> pushed(mu.atoms.size(), mu.atoms.front());
  parallel_for(mu.atoms.size(), threads, [&](std::size_t k) {
    const bool rest = detail::phase_speed(model, mu.atoms[k]) <= 1e-10;
    pushed[k] = rest ? mu.atoms[k] : flow_to(model, mu.atoms[k], t_test, h);
  });
  InvarianceReport rep;
  for (const auto& F : observables) {
    double before = 0.0, after = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
      const double f0 = F(model, mu.atoms[k]);
      before += mu.weights[k] * f0;
      after += mu.weights[k] * F(model, pushed[k]);
      lo = std::min(lo, f0);
      hi = std::max(hi, f0);
    }
    const double r = std::abs(after - before);
    rep.names.push_back(F.name());
    rep.residuals.push_back(r);
    rep.bounds.push_back(mu.t_span > 0.0 ? t_test * (hi - lo) / mu.t_span : 0.0);
    rep.max_residual = std::max(rep.max_residual, r);
  }
  return rep;
}

/// |E_mu[L_c] + hbar|
inline double check_minimizing(const TonelliModel& model, const EmpiricalMeasure& mu, double hbar) {
  return std::abs(mu.expectation(model, Observable::lagrangian_Lc()) + hbar);
}

struct MinimizingReport {
  double mean_Lc = 0.0;
  double gap = 0.0;          ///< |E[L_c] + hbar|
  double telescoping = 0.0;  ///< (U(start) - U(end) - t_span hbar) / t_span
  double discrepancy = 0.0;  ///< |E[L_c] - telescoping|
};

/// Also evaluates the time-averaged calibration identity using the field.
inline MinimizingReport check_minimizing(const TonelliModel& model, const EmpiricalMeasure& mu,
                                         const GridField& field) {
  MinimizingReport rep;
  rep.mean_Lc = mu.expectation(model, Observable::lagrangian_Lc());
  rep.gap = std::abs(rep.mean_Lc + field.hbar);
  if (mu.t_span > 0.0) {
    const double du = interpolate(field, mu.atoms.front().m) - interpolate(field, mu.end.m);
    rep.telescoping = (du - mu.t_span * field.hbar) / mu.t_span;
  } else {
    rep.telescoping = -field.hbar;
  }
  rep.discrepancy = std::abs(rep.mean_Lc - rep.telescoping);
  return rep;
}

struct GapReport {
  std::vector<double> gaps;  ///< E[L_c] + hbar for each measure
  double min_gap = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> violations;  ///< indices with gap < -tol
};

inline GapReport lower_bound_gap(const TonelliModel& model,
                                 const std::vector<EmpiricalMeasure>& measures, double hbar,
                                 double tol = 1e-2) {
  GapReport rep;
  for (std::size_t k = 0; k < measures.size(); ++k) {
    const double g = measures[k].expectation(model, Observable::lagrangian_Lc()) + hbar;
    rep.gaps.push_back(g);
    rep.min_gap = std::min(rep.min_gap, g);
    if (g < -tol) rep.violations.push_back(k);
  }
  return rep;
}

/// CSV: t, weight, particle, x0.., p0..
inline void write_measure(std::ostream& os, const EmpiricalMeasure& mu) {
  if (mu.atoms.empty()) return;
  const std::size_t d = mu.atoms.front().m.dim();
  std::vector<std::string> header = {"t", "weight", "particle"};
  for (std::size_t j = 0; j < d; ++j) header.push_back("x" + std::to_string(j));
  for (std::size_t j = 0; j < d; ++j) header.push_back("p" + std::to_string(j));
  csv::write_header(os, header);
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
    const auto& z = mu.atoms[k];
    for (std::size_t i = 0; i < z.m.n_particles(); ++i) {
      std::vector<double> row = {mu.times[k], mu.weights[k], static_cast<double>(i)};
      for (std::size_t j = 0; j < d; ++j) row.push_back(z.m(i, j));
      for (std::size_t j = 0; j < d; ++j) row.push_back(z.p(i, j));
      csv::write_row(os, row);
    }
  }
}

inline nlohmann::json invariance_summary(const InvarianceReport& rep) {
  nlohmann::json j = nlohmann::json::object();
  j["max_residual"] = rep.max_residual;
  nlohmann::json obs = nlohmann::json::array();
  for (std::size_t k = 0; k < rep.names.size(); ++k)
    obs.push_back({{"observable", rep.names[k]}, {"residual", rep.residuals[k]}, {"bound", rep.bounds[k]}});
  j["observables"] = std::move(obs);
  return j;
}

}  // namespace wkam
