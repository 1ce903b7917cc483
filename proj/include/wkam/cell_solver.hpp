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

// Semi-Lagrangian Lax-Oleinik solver for the cell problem on a periodic grid
// over the full configuration torus T^{N d}, for N d <= 3.
//
//   (T_h U)(x) = min_v  h L_c(x, v) + I[U](x + h v)
//
// I is multilinear periodic interpolation. In one grid dimension the minimum
// over v in [-r, r] is computed exactly, segment by segment of the piecewise
// linear interpolant. In two or three dimensions v is sampled on a coarse box
// grid, followed by a per-axis parabolic refinement.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wkam/csv.hpp"
#include "wkam/discounted.hpp"
#include "wkam/errors.hpp"
#include "wkam/model.hpp"
#include "wkam/parallel.hpp"

namespace wkam {

inline constexpr std::size_t max_grid_dimension = 3;

struct GridSpec {
  std::size_t n_particles = 1;
  std::vector<std::size_t> shape;  ///< nodes per axis; axis a = i*d + j

  std::size_t rank() const noexcept { return shape.size(); }

  std::size_t node_count() const {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
  }

  /// Same number of nodes on each of the N*d axes.
  static GridSpec uniform(std::size_t n_particles, std::size_t dim, std::size_t nodes) {
    return {n_particles, std::vector<std::size_t>(n_particles * dim, nodes)};
  }

  void validate(std::size_t dim) const {
    if (n_particles < 1) throw InvalidInput("grid: need at least one particle");
    if (shape.size() != n_particles * dim)
      throw InvalidInput("grid: rank must equal n_particles * dim");
    if (shape.empty() || shape.size() > max_grid_dimension)
      throw InvalidInput("grid: only N*d <= 3 is supported");
    for (auto s : shape)
      if (s < 4) throw InvalidInput("grid: need at least 4 nodes per axis");
  }
};

struct GridField {
  GridSpec spec;
  std::size_t dim = 1;
  std::vector<double> values;  ///< axis 0 varies fastest
  double hbar = 0.0;
  double h = 0.0;
  double tol = 0.0;
  double residual = 0.0;  ///< sup |U - T_h U - h hbar| / h at the returned field
  std::size_t iterations = 0;

  GridField() = default;
  GridField(GridSpec s, std::size_t d, double fill = 0.0)
      : spec(std::move(s)), dim(d), values(spec.node_count(), fill) {
    spec.validate(dim);
  }

  std::size_t rank() const noexcept { return spec.rank(); }
  std::size_t size() const noexcept { return values.size(); }
  double spacing(std::size_t axis) const { return 1.0 / static_cast<double>(spec.shape[axis]); }

  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(rank());
    for (std::size_t a = 0; a < rank(); ++a) {
      idx[a] = flat % spec.shape[a];
      flat /= spec.shape[a];
    }
    return idx;
  }

  std::size_t flat_index(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t a = rank(); a-- > 0;) flat = flat * spec.shape[a] + idx[a];
    return flat;
  }

  /// Configuration at a node (one row per particle).
  Configuration node_configuration(std::size_t flat) const {
    const auto idx = multi_index(flat);
    Configuration m(spec.n_particles, dim);
    for (std::size_t a = 0; a < rank(); ++a)
      m.values()[a] = static_cast<double>(idx[a]) * spacing(a);
    return m;
  }
};

/// Multilinear periodic interpolation at a point of R^{N d} (any lift).
inline double interpolate(const GridField& f, std::span<const double> x) {
  const std::size_t D = f.rank();
  if (x.size() != D) throw InvalidInput("interpolate: point has wrong length");
  std::size_t lo[max_grid_dimension];
  std::size_t hi[max_grid_dimension];
  double w[max_grid_dimension];
  for (std::size_t a = 0; a < D; ++a) {
    const auto n = static_cast<long long>(f.spec.shape[a]);
    const double s = x[a] * static_cast<double>(n);
    const double fl = std::floor(s);
    w[a] = s - fl;
    long long i0 = static_cast<long long>(fl) % n;
    if (i0 < 0) i0 += n;
    lo[a] = static_cast<std::size_t>(i0);
    hi[a] = static_cast<std::size_t>((i0 + 1) % n);
  }
  double acc = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << D); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = D; a-- > 0;) {
      const bool up = (corner >> a) & 1U;
      weight *= up ? w[a] : 1.0 - w[a];
      flat = flat * f.spec.shape[a] + (up ? hi[a] : lo[a]);
    }
    if (weight != 0.0) acc += weight * f.values[flat];
  }
  return acc;
}

inline double interpolate(const GridField& f, const Configuration& m) {
  if (m.n_particles() != f.spec.n_particles || m.dim() != f.dim)
    throw InvalidInput("interpolate: configuration shape does not match the grid");
  return interpolate(f, m.values());
}

/// Quadrature of the potential over one step of the scheme.
/// left_endpoint: -h Phi(x). trapezoid: -(h/2)(Phi(x) + I[Phi](x + h v)) with
/// I the same grid interpolation as for U; its consistency error is O(h^2)
/// instead of O(h).
enum class LoQuadrature { left_endpoint, trapezoid };

struct VelocitySampling {
  /// Half-width of the velocity box per coordinate; 0 selects
  /// safety * (|c|_inf + sqrt(2 range / gamma)) + 1.
  double radius = 0.0;
  double safety = 1.5;
  /// Coarse samples per axis when N d >= 2 (odd keeps v = 0 on the grid).
  std::size_t points_per_axis = 41;
  bool refine = true;
  /// Throw ResolutionError when the minimizer sits on the box boundary.
  bool strict = true;
  LoQuadrature quadrature = LoQuadrature::trapezoid;
};

inline double velocity_radius(const TonelliModel& model, const VelocitySampling& vs) {
  if (vs.radius > 0.0) return vs.radius;
  double cinf = 0.0;
  for (double x : model.c()) cinf = std::max(cinf, std::abs(x));
  constexpr double gamma = 0.5;
  return vs.safety * (cinf + std::sqrt(2.0 * model.potential_range() / gamma)) + 1.0;
}

struct LaxOleinikResult {
  GridField field;
  std::vector<double> argmin_v;  ///< node-major, N d entries per node
};

namespace detail {

struct NodeMin {
  double value;
  bool on_boundary;
};

/// Exact minimization for a single grid axis (N = d = 1).
inline NodeMin lo_node_1d(const GridField& U, double x, double h, double c, double r,
                          double* vout) {
  const auto n = static_cast<long long>(U.spec.shape[0]);
  const double dx = 1.0 / static_cast<double>(n);
  const double ylo = x - h * r, yhi = x + h * r;
  const auto k_first = static_cast<long long>(std::floor(ylo / dx));
  const auto k_last = static_cast<long long>(std::ceil(yhi / dx)) - 1;
  double best = std::numeric_limits<double>::infinity();
  double best_v = 0.0;
  for (long long k = k_first; k <= k_last; ++k) {
    const double a = std::max(ylo, static_cast<double>(k) * dx);
    const double b = std::min(yhi, static_cast<double>(k + 1) * dx);
    if (b < a) continue;
    const long long km = ((k % n) + n) % n;
    const double u0 = U.values[static_cast<std::size_t>(km)];
    const double u1 = U.values[static_cast<std::size_t>((km + 1) % n)];
    const double s = (u1 - u0) / dx;
    const double v = std::clamp(-c - s, (a - x) / h, (b - x) / h);
    const double val = h * (0.5 * v * v + c * v) + u0 + s * (x + h * v - static_cast<double>(k) * dx);
    if (val < best) {
      best = val;
      best_v = v;
    }
  }
  *vout = best_v;
  return {best, std::abs(best_v) >= r * (1.0 - 1e-12)};
}

struct LoContext {
  const TonelliModel& model;
  const GridField& U;
  double h;
  double r;
  const VelocitySampling& vs;
  std::size_t D;
  double inv_n;
  std::vector<double> cvec;  ///< c_j repeated per particle, length D
};

/// h (|v|^2/(2N) + c.mean(v)) + I[U](x + h v); the -h Phi(x) part is added by the caller.
inline double lo_objective(const LoContext& C, std::span<const double> x, std::span<const double> v,
                           std::span<double> y) {
  double kin = 0.0, lin = 0.0;
  for (std::size_t a = 0; a < C.D; ++a) {
    kin += v[a] * v[a];
    lin += C.cvec[a] * v[a];
    y[a] = x[a] + C.h * v[a];
  }
  return C.h * C.inv_n * (0.5 * kin + lin) + interpolate(C.U, y);
}

inline NodeMin lo_node_sampled(const LoContext& C, std::span<const double> x, double* vout) {
  const std::size_t D = C.D;
  const std::size_t P = std::max<std::size_t>(3, C.vs.points_per_axis);
  const double dv = 2.0 * C.r / static_cast<double>(P - 1);
  std::size_t total = 1;
  for (std::size_t a = 0; a < D; ++a) total *= P;
  double v[max_grid_dimension], y[max_grid_dimension];
  std::size_t best_q[max_grid_dimension] = {0, 0, 0};
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rem = flat, q[max_grid_dimension];
    for (std::size_t a = 0; a < D; ++a) {
      q[a] = rem % P;
      rem /= P;
      v[a] = -C.r + dv * static_cast<double>(q[a]);
    }
    const double val = lo_objective(C, x.first(D), {v, D}, {y, D});
    if (val < best) {
      best = val;
      std::copy(q, q + D, best_q);
    }
  }
  bool boundary = false;
  for (std::size_t a = 0; a < D; ++a) {
    v[a] = -C.r + dv * static_cast<double>(best_q[a]);
    boundary = boundary || best_q[a] == 0 || best_q[a] == P - 1;
  }
  std::copy(v, v + D, vout);
  if (!C.vs.refine || boundary) return {best, boundary};

  double vr[max_grid_dimension];
  std::copy(v, v + D, vr);
  for (std::size_t a = 0; a < D; ++a) {
    double vm[max_grid_dimension], vp[max_grid_dimension];
    std::copy(v, v + D, vm);
    std::copy(v, v + D, vp);
    vm[a] -= dv;
    vp[a] += dv;
    const double fm = lo_objective(C, x.first(D), {vm, D}, {y, D});
    const double fp = lo_objective(C, x.first(D), {vp, D}, {y, D});
    const double curv = fm - 2.0 * best + fp;
    if (curv > 0.0) vr[a] = v[a] + std::clamp(0.5 * dv * (fm - fp) / curv, -dv, dv);
  }
  const double refined = lo_objective(C, x.first(D), {vr, D}, {y, D});
  if (refined < best) {
    std::copy(vr, vr + D, vout);
    return {refined, false};
  }
  return {best, false};
}

}  // namespace detail

/**
 * One application of T_h. The returned field carries the unnormalized values
 * (T_h U)(x); hbar and bookkeeping fields are copied from the input.
 */
inline LaxOleinikResult lax_oleinik_step_detailed(const TonelliModel& model, const GridField& U,
                                                  double h, const VelocitySampling& vs = {},
                                                  unsigned threads = 1) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("lax-oleinik: h must be positive");
  if (U.dim != model.dim()) throw InvalidInput("lax-oleinik: grid dimension != model dimension");
  U.spec.validate(U.dim);
  if (U.values.size() != U.spec.node_count())
    throw InvalidInput("lax-oleinik: value count does not match the grid");
  for (double u : U.values)
    if (!std::isfinite(u)) throw InvalidInput("lax-oleinik: non-finite field value");

  const std::size_t D = U.rank();
  const double r = velocity_radius(model, vs);
  const bool trapezoid = vs.quadrature == LoQuadrature::trapezoid;
  // The arrival half of the trapezoid is folded into the interpolated field.
  std::vector<double> phi(U.size());
  for (std::size_t node = 0; node < U.size(); ++node)
    phi[node] = model.potential_energy(U.node_configuration(node));
  GridField W = U;
  if (trapezoid)
    for (std::size_t node = 0; node < U.size(); ++node) W.values[node] -= 0.5 * h * phi[node];
  const double departure_weight = trapezoid ? 0.5 * h : h;
  detail::LoContext ctx{model, W, h, r, vs, D, 1.0 / static_cast<double>(U.spec.n_particles), {}};
  ctx.cvec.resize(D);
  for (std::size_t a = 0; a < D; ++a) ctx.cvec[a] = model.c()[a % U.dim];

  LaxOleinikResult out{U, std::vector<double>(U.size() * D)};
  std::vector<char> boundary(U.size(), 0);
  parallel_for(U.size(), threads, [&](std::size_t node) {
    const Configuration m = U.node_configuration(node);
    detail::NodeMin nm{};
    if (D == 1)
      nm = detail::lo_node_1d(W, m.values()[0], h, ctx.cvec[0], r, &out.argmin_v[node]);
    else
      nm = detail::lo_node_sampled(ctx, m.values(), &out.argmin_v[node * D]);
    out.field.values[node] = nm.value - departure_weight * phi[node];
    boundary[node] = nm.on_boundary ? 1 : 0;
  });
  if (vs.strict)
    for (std::size_t node = 0; node < U.size(); ++node)
      if (boundary[node])
        throw ResolutionError("lax-oleinik: minimizing velocity on the sampling boundary, radius " +
                                  csv::format(r),
                              node);
  return out;
}

inline GridField lax_oleinik_step(const TonelliModel& model, const GridField& U, double h,
                                  const VelocitySampling& vs = {}, unsigned threads = 1) {
  return lax_oleinik_step_detailed(model, U, h, vs, threads).field;
}

struct CellOptions {
  double h = 0.02;
  double tol = 1e-8;
  std::size_t max_iters = 20000;
  /// U <- (1 - theta) U + theta (T_h U - min T_h U). theta = 1 is the plain
  /// iteration, which can cycle when minimizers rotate; theta < 1 averages the
  /// cycle away without moving the fixed point.
  double relaxation = 0.5;
  VelocitySampling sampling{};
  unsigned threads = 1;
};

/**
 * Iterates U <- (1 - theta) U + theta (T_h U - min T_h U), renormalized to
 * min U = 0. The returned U is the first iterate that satisfies
 * sup |T_h U + h hbar - U| <= tol h, with hbar = -min(T_h U)/h.
 */
inline GridField solve_cell(const TonelliModel& model, const GridSpec& grid,
                            const CellOptions& opt = {}, const GridField* initial = nullptr) {
  grid.validate(model.dim());
  if (!(opt.tol > 0.0)) throw InvalidInput("cell: tol must be positive");
  if (!(opt.relaxation > 0.0 && opt.relaxation <= 1.0))
    throw InvalidInput("cell: relaxation must lie in (0, 1]");
  GridField U = initial != nullptr ? *initial : GridField(grid, model.dim());
  if (initial != nullptr && (initial->spec.shape != grid.shape || initial->dim != model.dim()))
    throw InvalidInput("cell: initial field does not match the grid");
  U.h = opt.h;
  U.tol = opt.tol;
  std::vector<double> history;
  const double theta = opt.relaxation;
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    GridField TU = lax_oleinik_step(model, U, opt.h, opt.sampling, opt.threads);
    const double m = *std::min_element(TU.values.begin(), TU.values.end());
    double residual = 0.0;
    for (std::size_t k = 0; k < U.size(); ++k) {
      TU.values[k] -= m;
      residual = std::max(residual, std::abs(TU.values[k] - U.values[k]));
    }
    history.push_back(residual / opt.h);
    if (residual <= opt.tol * opt.h) {
      U.hbar = 0.0 - m / opt.h;
      U.residual = residual / opt.h;
      U.iterations = it + 1;
      // U itself is the accepted iterate; renormalize min U = 0 exactly.
      const double umin = *std::min_element(U.values.begin(), U.values.end());
      for (double& u : U.values) u -= umin;
      return U;
    }
    for (std::size_t k = 0; k < U.size(); ++k)
      U.values[k] = (1.0 - theta) * U.values[k] + theta * TU.values[k];
    const double umin = *std::min_element(U.values.begin(), U.values.end());
    for (double& u : U.values) u -= umin;
    U.hbar = 0.0 - m / opt.h;
  }
  const std::string msg = "cell: no convergence after " + std::to_string(opt.max_iters) +
                          " iterations, last residual/h " +
                          csv::format(history.empty() ? 0.0 : history.back());
  throw NonConvergence(msg, std::move(history));
}

/// Nodes where one-sided differences along some axis disagree by more than
/// 10 dx max(1, max |slope|).
inline std::vector<std::size_t> detect_kinks(const GridField& f) {
  std::vector<std::size_t> kinks;
  const std::size_t D = f.rank();
  double max_slope = 0.0;
  std::vector<std::size_t> stride(D, 1);
  for (std::size_t a = 1; a < D; ++a) stride[a] = stride[a - 1] * f.spec.shape[a - 1];
  auto neighbor = [&](std::size_t node, std::size_t a, int dir) {
    const auto idx = f.multi_index(node);
    const std::size_t n = f.spec.shape[a];
    const std::size_t j = (idx[a] + (dir > 0 ? 1 : n - 1)) % n;
    return node - idx[a] * stride[a] + j * stride[a];
  };
  for (std::size_t node = 0; node < f.size(); ++node)
    for (std::size_t a = 0; a < D; ++a)
      max_slope = std::max(max_slope, std::abs(f.values[neighbor(node, a, 1)] - f.values[node]) /
                                          f.spacing(a));
  for (std::size_t node = 0; node < f.size(); ++node)
    for (std::size_t a = 0; a < D; ++a) {
      const double dx = f.spacing(a);
      const double fwd = (f.values[neighbor(node, a, 1)] - f.values[node]) / dx;
      const double bwd = (f.values[node] - f.values[neighbor(node, a, -1)]) / dx;
      if (std::abs(fwd - bwd) > 10.0 * dx * std::max(1.0, max_slope)) {
        kinks.push_back(node);
        break;
      }
    }
  return kinks;
}

struct CrossCheckReport {
  double hbar_cell = 0.0;
  double hbar_discounted = 0.0;
  double difference = 0.0;
  double tolerance = 0.0;
  bool flagged = false;
};

inline CrossCheckReport cross_check_hbar(const TonelliModel& model, const GridSpec& grid,
                                         const CellOptions& cell, std::span<const double> eps_list,
                                         const Configuration& m_probe,
                                         const DiscountedTemplate& disc, double tolerance = 1e-2) {
  CrossCheckReport rep;
  rep.hbar_cell = solve_cell(model, grid, cell).hbar;
  rep.hbar_discounted = estimate_hbar_discounted(model, m_probe, eps_list, disc).hbar;
  rep.difference = std::abs(rep.hbar_cell - rep.hbar_discounted);
  rep.tolerance = tolerance;
  rep.flagged = rep.difference > tolerance;
  return rep;
}

/// "# key = value" metadata lines, then: i0..., x0..., U
inline void write_field(std::ostream& os, const GridField& f) {
  os << "# hbar = " << csv::format(f.hbar) << '\n';
  os << "# n_particles = " << f.spec.n_particles << '\n';
  os << "# dim = " << f.dim << '\n';
  os << "# shape =";
  for (auto s : f.spec.shape) os << ' ' << s;
  os << '\n';
  os << "# h = " << csv::format(f.h) << '\n';
  os << "# tol = " << csv::format(f.tol) << '\n';
  os << "# residual = " << csv::format(f.residual) << '\n';
  os << "# iterations = " << f.iterations << '\n';
  std::vector<std::string> header;
  for (std::size_t a = 0; a < f.rank(); ++a) header.push_back("i" + std::to_string(a));
  for (std::size_t a = 0; a < f.rank(); ++a) header.push_back("x" + std::to_string(a));
  header.push_back("U");
  csv::write_header(os, header);
  for (std::size_t node = 0; node < f.size(); ++node) {
    const auto idx = f.multi_index(node);
    std::vector<double> row;
    for (auto i : idx) row.push_back(static_cast<double>(i));
    for (std::size_t a = 0; a < f.rank(); ++a) row.push_back(static_cast<double>(idx[a]) * f.spacing(a));
    row.push_back(f.values[node]);
    csv::write_row(os, row);
  }
}

inline GridField read_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  GridField f;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = csv::trim(std::string_view(line).substr(1, eq - 1));
      const std::string val = csv::trim(std::string_view(line).substr(eq + 1));
      if (key == "hbar") f.hbar = csv::parse_double(val);
      else if (key == "n_particles") f.spec.n_particles = static_cast<std::size_t>(csv::parse_double(val));
      else if (key == "dim") f.dim = static_cast<std::size_t>(csv::parse_double(val));
      else if (key == "h") f.h = csv::parse_double(val);
      else if (key == "tol") f.tol = csv::parse_double(val);
      else if (key == "residual") f.residual = csv::parse_double(val);
      else if (key == "iterations") f.iterations = static_cast<std::size_t>(csv::parse_double(val));
      else if (key == "shape") {
        f.spec.shape.clear();
        for (const auto& tok : csv::split(val, ' '))
          if (!tok.empty()) f.spec.shape.push_back(static_cast<std::size_t>(csv::parse_double(tok)));
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& tok : csv::split(line)) row.push_back(csv::parse_double(tok));
    rows.push_back(std::move(row));
  }
  f.spec.validate(f.dim);
  if (rows.size() != f.spec.node_count()) throw InvalidInput("field file: wrong number of rows");
  f.values.assign(rows.size(), 0.0);
  const std::size_t D = f.rank();
  for (const auto& row : rows) {
    if (row.size() != 2 * D + 1) throw InvalidInput("field file: wrong number of columns");
    std::vector<std::size_t> idx(D);
    for (std::size_t a = 0; a < D; ++a) {
      if (row[a] < 0 || row[a] >= static_cast<double>(f.spec.shape[a]))
        throw InvalidInput("field file: node index out of range");
      idx[a] = static_cast<std::size_t>(row[a]);
    }
    f.values[f.flat_index(idx)] = row[2 * D];
  }
  return f;
}

}  // namespace wkam
