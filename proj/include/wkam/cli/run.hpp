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

// Command-line driver. Exit codes: 0 success, 2 invalid configuration or
// input, 3 solver failure (non-convergence, resolution, integration), 4 I/O.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "wkam/wkam.hpp"

namespace wkam::cli {

inline constexpr const char* version = "1.0.0";

enum ExitCode : int { ok = 0, generic_failure = 1, invalid = 2, solver_failure = 3, io_failure = 4 };

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path output = ".";
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RunContext {
  config::Params params;
  RunOptions options;
  std::mt19937_64 rng;
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> outputs;
  std::ostream& out;

  std::filesystem::path output_file(const std::string& name) {
    outputs.push_back(name);
    return options.output / name;
  }
};

namespace detail {

inline std::string g10(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x == 0.0 ? 0.0 : x);
  return buf;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mode", "model", "dim", "V", "W", "c", "n_particles", "x0", "p0", "v0", "a", "b",
      // flow
      "t_span", "h", "scheme",
      // discounted
      "epsilons", "value_tol", "tol_grad", "min_horizon", "max_iters",
      // cell
      "grid", "cell_h", "tol", "velocity_points", "velocity_radius", "refine", "relaxation",
      "quadrature",
      // calibrate / measure
      "seeds", "t_forward", "t_backward", "t_relax", "flow_h", "t_total", "thin", "t_test",
      "hbar",
      // audit
      "probes", "radius", "audit_particles"};
  return keys;
}

inline Configuration random_configuration(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Configuration m(n, d);
  for (double& x : m.values()) x = u(rng);
  return m;
}

/// From `key` (comma-separated, particle-major) or uniformly random.
inline Configuration configuration_from(RunContext& ctx, const std::string& key, std::size_t n,
                                        std::size_t d) {
  if (!ctx.params.has(key)) return random_configuration(ctx.rng, n, d);
  const auto v = ctx.params.reals(key);
  if (v.size() != n * d)
    throw InvalidInput("config: '" + key + "' needs n_particles * dim = " + std::to_string(n * d) +
                       " entries");
  return Configuration(n, d, v);
}

inline GridSpec grid_from(const config::Params& p, std::size_t n, std::size_t d) {
  GridSpec g = GridSpec::uniform(n, d, p.count("grid", std::size_t{400}, 4));
  g.validate(d);
  return g;
}

inline CellOptions cell_options_from(const config::Params& p, unsigned threads) {
  CellOptions o;
  o.h = p.positive("cell_h", 0.02);
  o.tol = p.positive("tol", 1e-8);
  o.max_iters = p.count("max_iters", std::size_t{20000});
  o.sampling.points_per_axis = p.count("velocity_points", std::size_t{41}, 3);
  o.sampling.radius = p.has("velocity_radius") ? p.positive("velocity_radius") : 0.0;
  o.sampling.refine = p.flag("refine", true);
  o.relaxation = p.positive("relaxation", 0.5);
  const std::string q = p.str("quadrature", "trapezoid");
  if (q == "trapezoid") o.sampling.quadrature = LoQuadrature::trapezoid;
  else if (q == "left") o.sampling.quadrature = LoQuadrature::left_endpoint;
  else throw InvalidInput("config: quadrature must be trapezoid or left");
  o.threads = threads;
  return o;
}

inline GridField solve_and_write_field(RunContext& ctx, const TonelliModel& model, std::size_t n) {
  const GridSpec grid = grid_from(ctx.params, n, model.dim());
  const GridField field = solve_cell(model, grid, cell_options_from(ctx.params, ctx.options.threads));
  auto os = csv::open_output(ctx.output_file("field.csv"));
  write_field(os, field);
  return field;
}

}  // namespace detail

inline void run_distweak(RunContext& ctx, const TonelliModel& model) {
  const auto& p = ctx.params;
  Configuration a = p.has("a") ? csv::read_configuration(p.path("a"))
                               : detail::random_configuration(ctx.rng, p.count("n_particles", std::size_t{4}), model.dim());
  Configuration b = p.has("b") ? csv::read_configuration(p.path("b"))
                               : detail::random_configuration(ctx.rng, a.n_particles(), a.dim());
  const WeakDistance w = dist_weak_matching(a, b);
  ctx.out << "dist_weak = " << detail::g10(w.distance) << '\n';
  ctx.results["dist_weak"] = w.distance;
  ctx.results["matching"] = w.matching;
}

inline void run_flow(RunContext& ctx, const TonelliModel& model) {
  const auto& p = ctx.params;
  const std::size_t n = p.count("n_particles", std::size_t{1});
  const std::size_t d = model.dim();
  const Configuration m0 = detail::configuration_from(ctx, "x0", n, d);
  Momentum p0(n, d);
  if (p.has("p0") && p.has("v0")) throw InvalidInput("config: give p0 or v0, not both");
  if (p.has("p0")) p0 = retag<MomentumTag>(detail::configuration_from(ctx, "p0", n, d));
  if (p.has("v0"))
    p0 = momentum_of(model, retag<VelocityTag>(detail::configuration_from(ctx, "v0", n, d)));
  const std::string scheme_name = p.str("scheme", "verlet");
  if (scheme_name != "verlet" && scheme_name != "midpoint")
    throw InvalidInput("config: scheme must be verlet or midpoint");
  const Scheme scheme = scheme_name == "verlet" ? Scheme::verlet : Scheme::midpoint;
  const Trajectory traj =
      integrate_hamiltonian(model, {m0, p0}, p.positive("t_span", 10.0), p.positive("h", 0.01), scheme);
  auto os = csv::open_output(ctx.output_file("trajectory.csv"));
  write_trajectory(os, traj);
  const double drift = energy_drift(model, traj);
  ctx.out << "energy_drift = " << detail::g10(drift) << '\n';
  ctx.results["energy_drift"] = drift;
  ctx.results["energy"] = energy(model, traj.front());
}

inline void run_discounted(RunContext& ctx, const TonelliModel& model) {
  const auto& p = ctx.params;
  const std::size_t n = p.count("n_particles", std::size_t{1});
  const Configuration m0 = detail::configuration_from(ctx, "x0", n, model.dim());
  const auto eps = p.reals("epsilons", std::vector<double>{0.2, 0.1, 0.05});
  for (double e : eps)
    if (!(e > 0.0)) throw InvalidInput("config: epsilons must be positive");
  DiscountedTemplate t;
  t.step_h = p.positive("h", 0.1);
  t.value_tol = p.positive("value_tol", 1e-3);
  t.tol_grad = p.positive("tol_grad", 1e-7);
  t.min_horizon = p.real("min_horizon", 0.0);
  t.max_iters = p.count("max_iters", std::size_t{5000});
  const HbarEstimate est = estimate_hbar_discounted(model, m0, eps, t);
  auto os = csv::open_output(ctx.output_file("sweep.csv"));
  write_sweep(os, est.table);
  ctx.out << "hbar = " << detail::g10(est.hbar) << '\n';
  ctx.results["hbar"] = est.hbar;
}

inline void run_cell(RunContext& ctx, const TonelliModel& model) {
  const GridField f = detail::solve_and_write_field(ctx, model, ctx.params.count("n_particles", std::size_t{1}));
  ctx.out << "hbar = " << detail::g10(f.hbar) << '\n';
  ctx.results["hbar"] = f.hbar;
  ctx.results["iterations"] = f.iterations;
  ctx.results["residual"] = f.residual;
  ctx.results["kinks"] = detect_kinks(f).size();
}

/// Seeds drawn uniformly until `count` differentiable ones are found.
inline std::vector<Configuration> differentiable_seeds(RunContext& ctx, const DifferentiableField& df,
                                                       std::size_t count) {
  std::vector<Configuration> seeds;
  const auto& g = df.field;
  for (std::size_t tries = 0; seeds.size() < count; ++tries) {
    if (tries > 1000 * count) throw InvalidInput("calibrate: could not find differentiable seeds");
    Configuration m = detail::random_configuration(ctx.rng, g.spec.n_particles, g.dim);
    if (!df.near_kink(m.values(), 3.0)) seeds.push_back(std::move(m));
  }
  return seeds;
}

inline void run_calibrate(RunContext& ctx, const TonelliModel& model) {
  const auto& p = ctx.params;
  const GridField f = detail::solve_and_write_field(ctx, model, p.count("n_particles", std::size_t{1}));
  const DifferentiableField df(f);
  const auto seeds = differentiable_seeds(ctx, df, p.count("seeds", std::size_t{10}));
  const double tf = p.real("t_forward", 1.0), tb = p.real("t_backward", 0.0);
  const double h = p.positive("flow_h", 0.005);
  nlohmann::json curves = nlohmann::json::array();
  auto os = csv::open_output(ctx.output_file("curves.csv"));
  double worst = 0.0;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const CalibratedCurve c = characteristic(model, df, seeds[s], tf, tb, h);
    os << "# curve " << s << '\n';
    write_trajectory(os, c.trajectory);
    curves.push_back(curve_summary(c));
    worst = std::max(worst, c.residual_per_unit_time);
  }
  ctx.results["hbar"] = f.hbar;
  ctx.results["curves"] = curves;
  ctx.results["max_residual_per_unit_time"] = worst;
  ctx.out << "hbar = " << detail::g10(f.hbar) << '\n'
          << "max_residual_per_unit_time = " << detail::g10(worst) << '\n';
}

inline void run_measure(RunContext& ctx, const TonelliModel& model) {
  const auto& p = ctx.params;
  const GridField f = detail::solve_and_write_field(ctx, model, p.count("n_particles", std::size_t{1}));
  const DifferentiableField df(f);
  const auto seeds = differentiable_seeds(ctx, df, 1);
  const double h = p.positive("flow_h", 0.005);
  OmegaOptions oo;
  oo.threads = ctx.options.threads;
  const OmegaApproximation om = approximate_omega(model, f, seeds, p.positive("t_relax", 10.0), h, oo);
  const EmpiricalMeasure mu = birkhoff_measure(model, om.points.front(), p.positive("t_total", 1000.0),
                                               h, p.count("thin", std::size_t{20}));
  const InvarianceReport inv = check_invariance(model, mu, p.positive("t_test", 1.0), h,
                                                standard_observables(model.dim()), ctx.options.threads);
  const MinimizingReport mr = check_minimizing(model, mu, f);
  auto os = csv::open_output(ctx.output_file("measure.csv"));
  write_measure(os, mu);
  ctx.results["hbar"] = f.hbar;
  ctx.results["mean_Lc"] = mr.mean_Lc;
  ctx.results["minimizing_gap"] = mr.gap;
  ctx.results["telescoping"] = mr.telescoping;
  ctx.results["invariance"] = invariance_summary(inv);
  ctx.results["snapped_to_rest_point"] = static_cast<bool>(om.snapped.front());
  ctx.out << "hbar = " << detail::g10(f.hbar) << '\n'
          << "minimizing_gap = " << detail::g10(mr.gap) << '\n'
          << "max_invariance_residual = " << detail::g10(inv.max_residual) << '\n';
}

inline void run_audit(RunContext& ctx, const TonelliModel& model) {
  const auto& p = ctx.params;
  const AssumptionReport rep =
      audit_assumptions(model, p.count("probes", std::size_t{10000}), p.positive("radius", 2.0),
                        ctx.options.seed, p.count("audit_particles", std::size_t{4}));
  ctx.results["gamma"] = rep.gamma_lower;
  ctx.results["gamma_observed"] = rep.gamma_observed;
  ctx.results["K_L"] = rep.K_L_upper;
  ctx.results["K_viii"] = rep.K_viii;
  ctx.results["C"] = rep.C_upper;
  ctx.results["probes"] = rep.probes;
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : rep.violations) v.push_back({{"assumption", x.assumption}, {"margin", x.margin}});
  ctx.results["violations"] = v;
  ctx.out << "gamma = " << detail::g10(rep.gamma_lower) << '\n'
          << "K_L = " << detail::g10(rep.K_L_upper) << '\n'
          << "violations = " << rep.violations.size() << '\n';
}

inline void run_oracle(RunContext& ctx, const TonelliModel& model) {
  if (model.dim() != 1) throw UnsupportedModel("oracle-hbar: only d = 1 is supported");
  if (!model.interaction().empty()) throw UnsupportedModel("oracle-hbar: W must be zero");
  const double hbar = oracle_hbar_1d(model.external(), model.c()[0]);
  const double cstar = critical_c(model.external());
  ctx.out << "hbar = " << detail::g10(hbar) << '\n';
  ctx.results["hbar"] = hbar;
  ctx.results["c_star"] = cstar;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return io_failure;
  if (dynamic_cast<const InvalidInput*>(&e)) return invalid;
  if (dynamic_cast<const NonConvergence*>(&e) || dynamic_cast<const ResolutionError*>(&e) ||
      dynamic_cast<const IntegrationFailure*>(&e) || dynamic_cast<const NonDifferentiablePoint*>(&e))
    return solver_failure;
  return generic_failure;
}

/// Runs one configured job; diagnostics go to `err`.
inline int run(const RunOptions& options, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const auto started = std::chrono::steady_clock::now();
  try {
    config::Params params(config::parse_file(options.config));
    params.require_known(detail::known_keys());
    const std::string mode = params.str("mode");
    const TonelliModel model = config::load_model(params);
    std::error_code ec;
    std::filesystem::create_directories(options.output, ec);
    if (ec) throw IoError("cannot create output directory " + options.output.string());

    RunContext ctx{std::move(params), options, std::mt19937_64(options.seed), {}, {}, out};
    if (mode == "distweak") run_distweak(ctx, model);
    else if (mode == "flow") run_flow(ctx, model);
    else if (mode == "discounted") run_discounted(ctx, model);
    else if (mode == "cell") run_cell(ctx, model);
    else if (mode == "calibrate") run_calibrate(ctx, model);
    else if (mode == "measure") run_measure(ctx, model);
    else if (mode == "audit") run_audit(ctx, model);
    else if (mode == "oracle-hbar") run_oracle(ctx, model);
    else throw InvalidInput("config: unknown mode '" + mode + "'");

    nlohmann::json manifest;
    manifest["tool"] = "wkam";
    manifest["version"] = version;
    manifest["mode"] = mode;
    manifest["config_file"] = options.config.string();
    manifest["config"] = ctx.params.raw().values;
    manifest["seed"] = options.seed;
    manifest["threads"] = options.threads;
    manifest["outputs"] = ctx.outputs;
    manifest["results"] = ctx.results;
    manifest["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    auto os = csv::open_output(options.output / "manifest.json");
    os << manifest.dump(2) << '\n';
    return ok;
  } catch (const std::exception& e) {
    err << "wkam: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

/// argv front end: --config PATH --output DIR --seed N --threads N
inline int main_entry(int argc, char** argv) {
  CLI::App app{"wkam: weak KAM numerics for N-particle Lagrangians on the torus"};
  RunOptions opt;
  std::string config, output = ".";
  app.add_option("--config", config, "run configuration file")->required();
  app.add_option("--output", output, "output directory");
  app.add_option("--seed", opt.seed, "random seed");
  app.add_option("--threads", opt.threads, "worker threads")->check(CLI::Range(1u, 1024u));
  app.set_version_flag("--version", version);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ok : invalid;
  }
  opt.config = config;
  opt.output = output;
  return run(opt);
}

}  // namespace wkam::cli
