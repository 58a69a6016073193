#include "subctrl/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "subctrl/control.hpp"
#include "subctrl/errors.hpp"
#include "subctrl/expression.hpp"
#include "subctrl/operators.hpp"
#include "subctrl/plots.hpp"
#include "subctrl/spectral.hpp"
#include "subctrl/transport.hpp"

namespace subctrl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

struct Context {
  const RunConfig& config;
  const GridDomain& grid;
  const VectorFieldSet& fields;
  fs::path dir;
  std::ostream& out;
  std::ostream& err;
};

SpectralOptions spectral_options(const SolverConfig& s) {
  SpectralOptions o;
  o.tolerance = s.eig_tol;
  o.max_krylov = s.lanczos_max;
  o.max_restarts = s.max_restarts;
  o.gap_floor = s.gap_floor;
  o.kernel_max = static_cast<std::size_t>(s.kernel_max);
  o.seed = s.seed;
  return o;
}

PoissonOptions poisson_options(const SolverConfig& s) {
  PoissonOptions o;
  o.tolerance = s.poisson_tol;
  o.max_iterations = s.max_iter;
  o.spectral = spectral_options(s);
  return o;
}

DiscreteOperator build_operator(const Context& ctx) {
  std::optional<Eigen::VectorXd> weight;
  if (ctx.config.fields.weight) weight = nodal_expression(ctx.grid, *ctx.config.fields.weight);
  return assemble_form_operator(ctx.grid, ctx.fields, weight);
}

DensityField density_from(const GridDomain& grid, const std::string& expression) {
  return DensityField::normalized(grid, nodal_expression(grid, expression));
}

ordered_json base_report(const std::string& command, const Context& ctx) {
  ordered_json r;
  r["schema_version"] = kSchemaVersion;
  r["command"] = command;
  r["status"] = static_cast<int>(kSuccess);
  r["config"] = config_to_json(ctx.config);
  r["grid"] = {{"dimension", ctx.grid.dimension()},
               {"resolution", ctx.grid.counts()},
               {"spacing", ctx.grid.spacing()},
               {"active_nodes", ctx.grid.active_count()}};
  return r;
}

template <typename Write>
void write_file(const fs::path& path, const Write& write) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write(out);
}

void write_vector_csv(const fs::path& path, const Eigen::VectorXd& v) {
  write_file(path, [&](std::ostream& out) {
    out << "index,value\n";
    out.precision(17);
    for (long i = 0; i < v.size(); ++i) out << i << ',' << v[i] << '\n';
  });
}

void write_common_dumps(const Context& ctx, const DiscreteOperator* op) {
  if (ctx.config.output.dump_grid) write_file(ctx.dir / "grid.csv", [&](std::ostream& o) { ctx.grid.write_csv(o); });
  if (ctx.config.output.dump_operator && op) {
    write_file(ctx.dir / "operator.coo", [&](std::ostream& o) { op->write_coo(o); });
  }
}

void write_control_dumps(const Context& ctx, const ControlField& controls) {
  if (!ctx.config.output.dump_controls) return;
  const fs::path sub = ctx.dir / "controls";
  fs::create_directories(sub);
  for (std::size_t k = 0; k <= controls.steps(); ++k) {
    std::ostringstream name;
    name << "step_" << std::setw(4) << std::setfill('0') << k << ".csv";
    write_file(sub / name.str(), [&](std::ostream& o) { controls.write_csv(k, o); });
  }
}

// Plots never change the exit status.
template <typename Emit>
void best_effort_plots(const Context& ctx, const Emit& emit) {
  if (!ctx.config.output.plots) return;
  try {
    emit();
  } catch (const std::exception& e) {
    ctx.err << "warning: plot output failed: " << e.what() << '\n';
  }
}

std::vector<std::vector<double>> control_series(const ControlField& controls) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k <= controls.steps(); ++k) {
    rows.push_back({static_cast<double>(k), controls.times()[k], controls.controls(k).cwiseAbs().maxCoeff()});
  }
  return rows;
}

int cmd_gap(const Context& ctx, ordered_json& report) {
  const DiscreteOperator op = build_operator(ctx);
  write_common_dumps(ctx, &op);
  const SpectralOptions options = spectral_options(ctx.config.solver);
  const SpectralReport gap = spectral_gap(op, options);
  std::size_t kernel_dim = gap.kernel_dim;
  if (ctx.config.solver.kernel_tol) {
    kernel_dim = kernel_basis(op, *ctx.config.solver.kernel_tol, options.kernel_max, options).size();
  }
  const int status = gap.certified() ? kSuccess : kNegative;
  report["lambda"] = gap.lambda;
  report["residual"] = gap.residual;
  report["floor"] = gap.floor;
  report["gershgorin_bound"] = op.gershgorin_bound();
  report["certified"] = gap.certified();
  report["kernel_dim"] = kernel_dim;
  report["iterations"] = gap.iterations;
  report["restarts"] = gap.restarts;
  if (ctx.config.output.dump_eigenvector) write_vector_csv(ctx.dir / "eigenvector.csv", gap.eigenvector);
  best_effort_plots(ctx, [&] {
    write_heatmaps(ctx.grid, gap.eigenvector, ctx.dir, "eigenvector");
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < gap.ritz_history.size(); ++k) {
      rows.push_back({static_cast<double>(k + 1), gap.ritz_history[k]});
    }
    write_series(ctx.dir / "ritz_history.csv", "step,lambda", rows);
  });
  ctx.out << "lambda = " << gap.lambda << (gap.certified() ? " (certified)" : " (not certifiably controllable)")
          << ", kernel_dim = " << kernel_dim << '\n';
  return status;
}

int cmd_steer(const Context& ctx, ordered_json& report) {
  const ExperimentConfig& e = ctx.config.experiment;
  const DensityField rho0 = density_from(ctx.grid, e.rho0);
  const DensityField rho1 = density_from(ctx.grid, e.rho1);
  const double c = e.c.value_or(default_density_floor(ctx.grid));
  const DiscreteOperator op = build_operator(ctx);
  write_common_dumps(ctx, &op);
  const PoissonSolver solver(op, poisson_options(ctx.config.solver));
  const Eigen::VectorXd f = steering_potential(solver, rho0, rho1, c);
  const ControlField controls = steering_controls(op, f, rho0, rho1, uniform_times(e.steps), c);
  const double residual = continuity_residual(controls, op);
  const EnergyReport energy = energy_bound(op, f, solver.gap().lambda, solver.gap().floor, rho0, rho1);
  const int status = residual <= e.residual_threshold ? kSuccess : kFailure;

  report["lambda"] = solver.gap().lambda;
  report["c"] = c;
  report["K"] = e.steps;
  report["residual"] = residual;
  report["effort_lhs"] = energy.lhs;
  report["effort_rhs"] = energy.rhs;
  report["effort_index"] = energy.ratio;
  report["bound_holds"] = energy.holds;
  report["max_control"] = controls.max_abs();
  write_control_dumps(ctx, controls);
  if (ctx.config.output.dump_controls) write_vector_csv(ctx.dir / "potential.csv", f);

  if (e.transport) {
    const ParticleEnsemble start = sample_density(rho0, static_cast<std::size_t>(e.particles), e.seed);
    IntegrateOptions integrate;
    integrate.substeps = e.substeps;
    integrate.threads = ctx.config.solver.threads;
    integrate.store_trajectories = ctx.config.output.dump_trajectories;
    const ParticleEnsemble end = integrate_ensemble(start, controls, ctx.fields, integrate);
    report["transport"] = {{"particles", e.particles},
                           {"seed", e.seed},
                           {"distance_initial", density_distance(start, rho1)},
                           {"distance_terminal", density_distance(end, rho1)},
                           {"exits", end.exits}};
    if (ctx.config.output.dump_trajectories) {
      write_file(ctx.dir / "trajectories.csv", [&](std::ostream& o) { end.write_trajectories(o); });
    }
  }
  best_effort_plots(ctx, [&] {
    write_heatmaps(ctx.grid, rho0.values(), ctx.dir, "rho0");
    write_heatmaps(ctx.grid, rho1.values(), ctx.dir, "rho1");
    write_heatmaps(ctx.grid, f, ctx.dir, "potential");
    write_series(ctx.dir / "control_max.csv", "step,t,max_abs_u", control_series(controls));
  });
  ctx.out << "residual = " << residual << ", effort index = " << energy.ratio << '\n';
  return status;
}

int cmd_reach(const Context& ctx, ordered_json& report) {
  const ExperimentConfig& e = ctx.config.experiment;
  ReachOptions options;
  options.target = e.y;
  options.radius = e.radius;
  options.alpha = e.alpha;
  options.steps = e.steps;
  options.substeps = e.substeps;
  options.floor = e.c;
  options.floor_mix = e.floor_mix;
  options.poisson = poisson_options(ctx.config.solver);
  options.threads = ctx.config.solver.threads;
  if (!ctx.grid.contains(options.target)) throw OutOfDomainError("target point y lies outside the grid box");
  const DiscreteOperator op = build_operator(ctx);
  write_common_dumps(ctx, &op);
  const ReachabilityReport reach = reach_experiment(ctx.fields, ctx.grid, op, options);
  const int status = reach.fraction >= e.reach_threshold ? kSuccess : kFailure;
  report["lambda"] = reach.lambda;
  report["y"] = reach.target;
  report["R"] = reach.radius;
  report["alpha"] = reach.alpha;
  report["floor_mix"] = reach.floor_mix;
  report["seeds"] = reach.seeds;
  report["fraction"] = reach.fraction;
  report["fraction_terminal"] = reach.fraction_terminal;
  report["exits"] = reach.exits;
  report["threshold"] = e.reach_threshold;
  if (e.reverse) {
    const ReverseReachReport reverse =
        reverse_reach(ctx.fields, ctx.grid, op, options, static_cast<std::size_t>(e.particles), e.seed);
    report["reverse"] = {{"particles", reverse.particles}, {"coverage", reverse.coverage}, {"exits", reverse.exits}};
  }
  if (ctx.config.output.dump_trajectories) {
    write_file(ctx.dir / "trajectories.csv", [&](std::ostream& o) { reach.ensemble.write_trajectories(o); });
  }
  best_effort_plots(ctx, [&] {
    Eigen::VectorXd reached(static_cast<long>(reach.seeds));
    for (std::size_t p = 0; p < reach.seeds; ++p) reached[static_cast<long>(p)] = reach.reached[p];
    write_heatmaps(ctx.grid, reached, ctx.dir, "reached");
    std::vector<std::vector<double>> rows;
    const double r2 = reach.radius * reach.radius;
    for (std::size_t k = 0; k < reach.ensemble.snapshots; ++k) {
      std::size_t inside = 0;
      for (std::size_t p = 0; p < reach.seeds; ++p) {
        const auto x = reach.ensemble.snapshot(p, k);
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - reach.target[j]) * (x[j] - reach.target[j]);
        inside += s <= r2;
      }
      rows.push_back({static_cast<double>(k), static_cast<double>(inside) / static_cast<double>(reach.seeds)});
    }
    write_series(ctx.dir / "reach_progress.csv", "step,fraction_in_ball", rows);
  });
  ctx.out << "reached fraction = " << reach.fraction << " (terminal " << reach.fraction_terminal << ")\n";
  return status;
}

int cmd_kernel(const Context& ctx, ordered_json& report) {
  const ExperimentConfig& e = ctx.config.experiment;
  const DiscreteOperator op = build_operator(ctx);
  write_common_dumps(ctx, &op);
  const SpectralOptions spectral = spectral_options(ctx.config.solver);
  const double tol = ctx.config.solver.kernel_tol.value_or(absolute_gap_floor(op, ctx.config.solver.gap_floor));
  InvarianceOptions invariance;
  invariance.samples = static_cast<std::size_t>(e.invariance_samples);
  invariance.tau = e.tau;
  invariance.seed = e.seed;
  const auto sets = detect_invariant_sets(op, ctx.grid, ctx.fields, tol, spectral, invariance);
  report["kernel_tol"] = tol;
  report["set_count"] = sets.size();
  ordered_json list = ordered_json::array();
  for (const auto& set : sets) {
    const auto members = std::count(set.indicator.begin(), set.indicator.end(), std::uint8_t{1});
    list.push_back({{"nodes", members}, {"measure", set.mass}, {"defect", set.defect}});
  }
  report["sets"] = list;
  best_effort_plots(ctx, [&] {
    for (std::size_t s = 0; s < sets.size(); ++s) {
      Eigen::VectorXd v(static_cast<long>(sets[s].indicator.size()));
      for (long a = 0; a < v.size(); ++a) v[a] = sets[s].indicator[static_cast<std::size_t>(a)];
      write_heatmaps(ctx.grid, v, ctx.dir, "invariant_set_" + std::to_string(s + 1));
    }
  });
  ctx.out << sets.size() << " candidate invariant set(s)\n";
  return sets.empty() ? kSuccess : kNegative;
}

int cmd_track(const Context& ctx, ordered_json& report) {
  const ExperimentConfig& e = ctx.config.experiment;
  if (e.path.size() < 2) throw ConfigError("track needs 'experiment.path' with at least two densities");
  std::vector<DensityField> path;
  for (const auto& expr : e.path) path.push_back(density_from(ctx.grid, expr));
  const double c = e.c.value_or(default_density_floor(ctx.grid));
  const DiscreteOperator op = build_operator(ctx);
  write_common_dumps(ctx, &op);
  const PoissonSolver solver(op, poisson_options(ctx.config.solver));
  const ControlField controls = tracking_controls(solver, path, e.path_times, c);
  const double residual = continuity_residual(controls, op);
  const int status = residual <= e.residual_threshold ? kSuccess : kFailure;
  report["lambda"] = solver.gap().lambda;
  report["c"] = c;
  report["K"] = controls.steps();
  report["residual"] = residual;
  report["max_control"] = controls.max_abs();
  write_control_dumps(ctx, controls);
  best_effort_plots(ctx, [&] {
    write_heatmaps(ctx.grid, path.front().values(), ctx.dir, "path_first");
    write_heatmaps(ctx.grid, path.back().values(), ctx.dir, "path_last");
    write_series(ctx.dir / "control_max.csv", "step,t,max_abs_u", control_series(controls));
  });
  ctx.out << "tracking residual = " << residual << '\n';
  return status;
}

void validate_expression(const std::string& text, int dimension, const std::string& what) {
  const Expression e = Expression::parse(text);
  if (e.max_variable() > dimension) {
    throw ConfigError("'" + what + "' references x" + std::to_string(e.max_variable()) + " but the grid has dimension " +
                      std::to_string(dimension));
  }
}

void write_report(const fs::path& path, const ordered_json& report) {
  write_file(path, [&](std::ostream& o) { o << report.dump(2) << '\n'; });
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"gap", "steer", "reach", "kernel", "track"};
  return names;
}

int run_command(const std::string& command, RunConfig config, const CommandOptions& options, std::ostream& out,
                std::ostream& err) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), command) == names.end()) {
    err << "error: unknown command '" << command << "'\n";
    return kFailure;
  }
  if (options.out_dir) config.output.dir = *options.out_dir;
  if (options.plots) config.output.plots = true;

  std::optional<ordered_json> report;
  fs::path report_path;
  try {
    const GridDomain grid = build_grid(config.grid);
    const VectorFieldSet fields = build_fields(config.fields);
    const int d = grid.dimension();
    if (config.fields.weight) validate_expression(*config.fields.weight, d, "fields.weight");
    validate_expression(config.experiment.rho0, d, "experiment.rho0");
    validate_expression(config.experiment.rho1, d, "experiment.rho1");
    for (const auto& p : config.experiment.path) validate_expression(p, d, "experiment.path");
    ExperimentConfig& e = config.experiment;
    if (!e.c) e.c = default_density_floor(grid);
    if (!e.alpha) e.alpha = e.radius * e.radius / 9.0;
    if (!e.floor_mix) e.floor_mix = 2.0 * *e.c * grid.box_volume();
    if (options.dry_run) {
      out << "config ok: " << command << " on a " << d << "-dimensional grid with " << grid.active_count()
          << " active nodes\n";
      return kSuccess;
    }

    const fs::path dir = config.output.dir;
    fs::create_directories(dir);
    report_path = dir / (command + "_report.json");
    const Context ctx{config, grid, fields, dir, out, err};
    report = base_report(command, ctx);
    int status = kFailure;
    try {
      if (command == "gap") status = cmd_gap(ctx, *report);
      if (command == "steer") status = cmd_steer(ctx, *report);
      if (command == "reach") status = cmd_reach(ctx, *report);
      if (command == "kernel") status = cmd_kernel(ctx, *report);
      if (command == "track") status = cmd_track(ctx, *report);
    } catch (const NotControllableError& e) {
      (*report)["lambda"] = e.gap();
      (*report)["kernel_dim"] = e.kernel_dim();
      (*report)["message"] = e.what();
      status = kNegative;
      err << e.what() << '\n';
    }
    (*report)["status"] = status;
    write_report(report_path, *report);
    return status;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

int run_command_file(const std::string& command, const std::string& config_path, const CommandOptions& options,
                     std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = load_run_config(config_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return run_command(command, std::move(config), options, out, err);
}

}  // namespace subctrl
