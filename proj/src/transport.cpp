#include "subctrl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "subctrl/errors.hpp"

namespace subctrl {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Per-cell probability mass (mean of active corner values times cell volume).
std::vector<double> cell_masses(const DensityField& rho) {
  const GridDomain& grid = rho.grid();
  const int d = grid.dimension();
  const int corners = 1 << d;
  const double volume = grid.cell_volume();
  std::vector<double> mass(grid.cell_count(), 0.0);
  for (std::size_t cell = 0; cell < mass.size(); ++cell) {
    const auto idx = grid.cell_multi_index(cell);
    std::size_t base = 0;
    for (int k = 0; k < d; ++k) base += static_cast<std::size_t>(idx[k]) * grid.stride(k);
    double sum = 0.0;
    for (int c = 0; c < corners; ++c) {
      std::size_t node = base;
      for (int k = 0; k < d; ++k) {
        if (c & (1 << k)) node += grid.stride(k);
      }
      if (const long a = grid.active_index(node); a >= 0) sum += rho.values()[a];
    }
    mass[cell] = sum / corners * volume;
  }
  return mass;
}

// Velocity v(t, x) = sum_i u_i(t, x) g_i(x) within control step k at relative
// time theta in [0, 1].
class Velocity {
 public:
  Velocity(const ControlField& controls, const VectorFieldSet& fields)
      : controls_(controls), fields_(fields), grid_(controls.grid()) {}

  // Returns false when the containing cell has no active corner.
  bool operator()(std::size_t k, double theta, std::span<const double> x, std::span<double> v) const {
    const int d = grid_.dimension();
    const int corners = 1 << d;
    std::array<long, 1 << GridDomain::kMaxDimension> corner;
    std::array<double, 1 << GridDomain::kMaxDimension> weight;
    std::array<double, GridDomain::kMaxDimension> frac;
    std::size_t base = 0;
    for (int j = 0; j < d; ++j) {
      const double s = (x[j] - grid_.lower()[j]) / grid_.spacing()[j];
      const int i = std::clamp(static_cast<int>(std::floor(s)), 0, grid_.counts()[j] - 2);
      frac[j] = std::clamp(s - i, 0.0, 1.0);
      base += static_cast<std::size_t>(i) * grid_.stride(j);
    }
    bool masked = false;
    for (int c = 0; c < corners; ++c) {
      std::size_t node = base;
      double w = 1.0;
      for (int j = 0; j < d; ++j) {
        if (c & (1 << j)) {
          node += grid_.stride(j);
          w *= frac[j];
        } else {
          w *= 1.0 - frac[j];
        }
      }
      corner[c] = grid_.active_index(node);
      weight[c] = w;
      masked = masked || corner[c] < 0;
    }
    if (masked) {
      const auto loc = grid_.locate(x);
      if (!loc.valid) return false;
      for (int c = 0; c < corners; ++c) corner[c] = loc.corner[c], weight[c] = loc.weight[c];
    }
    const Eigen::MatrixXd& u0 = controls_.controls(k);
    const Eigen::MatrixXd& u1 = controls_.controls(k + 1);
    std::array<double, GridDomain::kMaxDimension> g;
    std::fill(v.begin(), v.end(), 0.0);
    for (int i = 0; i < fields_.count(); ++i) {
      double a = 0.0, b = 0.0;
      for (int c = 0; c < corners; ++c) {
        if (weight[c] == 0.0) continue;
        a += weight[c] * u0(corner[c], i);
        b += weight[c] * u1(corner[c], i);
      }
      const double u = (1.0 - theta) * a + theta * b;
      if (u == 0.0) continue;
      fields_.evaluate(i, x, std::span<double>(g.data(), static_cast<std::size_t>(d)));
      for (int j = 0; j < d; ++j) v[j] += u * g[j];
    }
    for (int j = 0; j < d; ++j) {
      if (!std::isfinite(v[j])) {
        std::ostringstream msg;
        msg << "non-finite velocity at (";
        for (int q = 0; q < d; ++q) msg << (q ? ", " : "") << x[q];
        msg << ")";
        throw EvaluationError(msg.str());
      }
    }
    return true;
  }

 private:
  const ControlField& controls_;
  const VectorFieldSet& fields_;
  const GridDomain& grid_;
};

// Moves x back into the admissible region. Returns true if it had left.
bool project(const GridDomain& grid, std::span<double> x) {
  bool out = false;
  for (int j = 0; j < grid.dimension(); ++j) {
    if (x[j] < grid.lower()[j] || x[j] > grid.upper()[j]) out = true;
  }
  if (out) grid.clamp(x);
  if (grid.masked() && !grid.locate(x).valid) {
    const auto p = grid.point(grid.nearest_active(x));
    std::copy(p.begin(), p.end(), x.begin());
    out = true;
  }
  return out;
}

template <typename Body>
void parallel_for(std::size_t count, int threads, const Body& body) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, count ? count : 1);
  if (workers == 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * chunk), end = std::min(count, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

PoissonSolver certified_solver(const DiscreteOperator& op, const PoissonOptions& options) {
  return PoissonSolver(op, options);
}

void check_target(const GridDomain& grid, const ReachOptions& options) {
  if (options.target.size() != static_cast<std::size_t>(grid.dimension())) {
    throw ConfigError("target point has " + std::to_string(options.target.size()) + " coordinates, expected " +
                      std::to_string(grid.dimension()));
  }
  if (!grid.contains(options.target)) throw OutOfDomainError("target point lies outside the grid box");
  if (!(options.radius > 0.0)) throw ConfigError("target radius must be positive");
  if (options.alpha && !(*options.alpha > 0.0)) throw ConfigError("kernel width alpha must be positive");
}

struct ReachSetup {
  double alpha;
  double beta;
  double c;
  std::optional<DensityField> rho0;
  std::optional<DensityField> rho1;
};

ReachSetup reach_setup(const GridDomain& grid, const ReachOptions& options) {
  check_target(grid, options);
  ReachSetup s;
  s.alpha = options.alpha.value_or(options.radius * options.radius / 9.0);
  s.c = options.floor.value_or(default_density_floor(grid));
  s.beta = options.floor_mix.value_or(2.0 * s.c * grid.box_volume());
  if (!(s.beta >= 0.0 && s.beta < 1.0)) throw ConfigError("floor_mix must lie in [0, 1)");
  s.rho0.emplace(DensityField::uniform(grid));
  s.rho1.emplace(reach_target(grid, options.target, s.alpha, s.beta));
  return s;
}

}  // namespace

void ParticleEnsemble::write_trajectories(std::ostream& out) const {
  if (snapshots == 0) throw ConfigError("ensemble has no stored trajectories");
  out << "particle,step";
  for (int j = 0; j < dimension; ++j) out << ",x" << j + 1;
  out << '\n';
  out.precision(17);
  for (std::size_t p = 0; p < count(); ++p) {
    for (std::size_t k = 0; k < snapshots; ++k) {
      out << p << ',' << k;
      for (double x : snapshot(p, k)) out << ',' << x;
      out << '\n';
    }
  }
}

ParticleEnsemble node_ensemble(const GridDomain& grid) {
  ParticleEnsemble e;
  e.dimension = grid.dimension();
  e.positions.reserve(grid.active_count() * static_cast<std::size_t>(e.dimension));
  for (std::size_t a = 0; a < grid.active_count(); ++a) {
    for (double x : grid.point(a)) e.positions.push_back(x);
  }
  return e;
}

ParticleEnsemble dual_cell_ensemble(const GridDomain& grid) {
  ParticleEnsemble e = node_ensemble(grid);
  const auto d = static_cast<std::size_t>(e.dimension);
  for (std::size_t a = 0; a < grid.active_count(); ++a) {
    const auto idx = grid.multi_index(grid.node_of(a));
    for (std::size_t j = 0; j < d; ++j) {
      const double quarter = 0.25 * grid.spacing()[j];
      if (idx[j] == 0) e.positions[a * d + j] += quarter;
      if (idx[j] == grid.counts()[j] - 1) e.positions[a * d + j] -= quarter;
    }
  }
  return e;
}

ParticleEnsemble sample_density(const DensityField& rho, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ConfigError("particle count must be at least 1");
  const GridDomain& grid = rho.grid();
  const int d = grid.dimension();
  const auto mass = cell_masses(rho);
  std::vector<double> cdf(mass.size());
  std::partial_sum(mass.begin(), mass.end(), cdf.begin());
  const double total = cdf.back();
  if (!(total > 0.0)) throw ConfigError("density has no cell mass to sample from");

  ParticleEnsemble e;
  e.dimension = d;
  e.seed = seed;
  e.positions.resize(count * static_cast<std::size_t>(d));
  std::mt19937_64 rng(seed);
  for (std::size_t p = 0; p < count; ++p) {
    const double target = uniform01(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) --it;
    // Skip zero-mass cells that share the cumulative value.
    std::size_t cell = static_cast<std::size_t>(it - cdf.begin());
    while (mass[cell] == 0.0 && cell + 1 < mass.size()) ++cell;
    const auto idx = grid.cell_multi_index(cell);
    for (int j = 0; j < d; ++j) {
      const double x = grid.lower()[j] + (idx[j] + uniform01(rng)) * grid.spacing()[j];
      e.positions[p * d + j] = std::min(x, grid.upper()[j]);
    }
  }
  return e;
}

ParticleEnsemble integrate_ensemble(const ParticleEnsemble& start, const ControlField& controls,
                                    const VectorFieldSet& fields, const IntegrateOptions& options) {
  const GridDomain& grid = controls.grid();
  const int d = grid.dimension();
  if (start.dimension != d || fields.dimension() != d) {
    throw ConfigError("ensemble, fields and control grid dimensions differ");
  }
  if (fields.count() != controls.field_count()) throw ConfigError("control count does not match the field count");
  if (options.substeps < 1) throw ConfigError("substeps must be at least 1");
  const std::size_t count = start.count();
  const std::size_t steps = controls.steps();
  const auto& times = controls.times();

  ParticleEnsemble out = start;
  out.trajectories.clear();
  out.snapshots = 0;
  if (options.store_trajectories) {
    out.snapshots = steps + 1;
    out.trajectories.resize(count * out.snapshots * static_cast<std::size_t>(d));
  }
  std::vector<long> exits(count, 0);
  const Velocity velocity(controls, fields);
  const int sub = options.substeps;

  parallel_for(count, options.threads, [&](std::size_t begin, std::size_t end) {
    std::array<double, GridDomain::kMaxDimension> xb, k1b, k2b, k3b, k4b, yb;
    const auto n = static_cast<std::size_t>(d);
    std::span<double> x(xb.data(), n), k1(k1b.data(), n), k2(k2b.data(), n), k3(k3b.data(), n),
        k4(k4b.data(), n), y(yb.data(), n);
    auto eval = [&](std::size_t k, double theta, std::span<double> point, std::span<double> v) {
      grid.clamp(point);
      if (!velocity(k, theta, point, v)) {
        project(grid, point);
        if (!velocity(k, theta, point, v)) std::fill(v.begin(), v.end(), 0.0);
      }
    };
    for (std::size_t p = begin; p < end; ++p) {
      std::copy_n(start.positions.begin() + static_cast<long>(p * n), n, x.begin());
      if (project(grid, x)) ++exits[p];
      if (options.store_trajectories) std::copy(x.begin(), x.end(), out.trajectories.begin() + static_cast<long>(p * out.snapshots * n));
      for (std::size_t k = 0; k < steps; ++k) {
        const double dt = (times[k + 1] - times[k]) / sub;
        bool exited = false;
        for (int s = 0; s < sub; ++s) {
          const double t0 = static_cast<double>(s) / sub, th = (s + 0.5) / sub, t1 = static_cast<double>(s + 1) / sub;
          std::copy(x.begin(), x.end(), y.begin());
          eval(k, t0, y, k1);
          for (std::size_t j = 0; j < n; ++j) y[j] = x[j] + 0.5 * dt * k1[j];
          eval(k, th, y, k2);
          for (std::size_t j = 0; j < n; ++j) y[j] = x[j] + 0.5 * dt * k2[j];
          eval(k, th, y, k3);
          for (std::size_t j = 0; j < n; ++j) y[j] = x[j] + dt * k3[j];
          eval(k, t1, y, k4);
          for (std::size_t j = 0; j < n; ++j) x[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
          if (project(grid, x)) exited = true;
        }
        if (exited) ++exits[p];
        if (options.store_trajectories) {
          std::copy(x.begin(), x.end(), out.trajectories.begin() + static_cast<long>((p * out.snapshots + k + 1) * n));
        }
      }
      std::copy(x.begin(), x.end(), out.positions.begin() + static_cast<long>(p * n));
    }
  });
  out.exits = start.exits + std::accumulate(exits.begin(), exits.end(), 0L);
  return out;
}

double density_distance(const ParticleEnsemble& ensemble, const DensityField& rho) {
  const GridDomain& grid = rho.grid();
  if (ensemble.dimension != grid.dimension()) throw ConfigError("ensemble dimension does not match the grid");
  const auto mass = cell_masses(rho);
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  std::vector<long> histogram(mass.size(), 0);
  for (std::size_t p = 0; p < ensemble.count(); ++p) ++histogram[grid.cell_of_point(ensemble.position(p))];
  const double count = static_cast<double>(ensemble.count());
  double distance = 0.0;
  for (std::size_t c = 0; c < mass.size(); ++c) distance += std::abs(histogram[c] / count - mass[c] / total);
  return distance;
}

DensityField reach_target(const GridDomain& grid, std::span<const double> y, double alpha, double beta) {
  if (!(alpha > 0.0)) throw ConfigError("kernel width alpha must be positive");
  const long n = static_cast<long>(grid.active_count());
  Eigen::VectorXd g(n);
  for (long a = 0; a < n; ++a) g[a] = std::exp(-squared_distance(grid.point(static_cast<std::size_t>(a)), y) / alpha);
  const Eigen::VectorXd gaussian = DensityField::normalized(grid, g).values();
  const Eigen::VectorXd uniform = DensityField::uniform(grid).values();
  return DensityField::normalized(grid, (1.0 - beta) * gaussian + beta * uniform);
}

ReachabilityReport reach_experiment(const VectorFieldSet& fields, const GridDomain& grid, const DiscreteOperator& op,
                                    const ReachOptions& options) {
  ReachSetup s = reach_setup(grid, options);
  const PoissonSolver solver = certified_solver(op, options.poisson);
  const Eigen::VectorXd f = steering_potential(solver, *s.rho0, *s.rho1, s.c);
  const ControlField controls = steering_controls(op, f, *s.rho0, *s.rho1, uniform_times(options.steps), s.c);
  IntegrateOptions integrate;
  integrate.substeps = options.substeps;
  integrate.store_trajectories = true;
  integrate.threads = options.threads;
  ParticleEnsemble end = integrate_ensemble(dual_cell_ensemble(grid), controls, fields, integrate);

  ReachabilityReport report;
  report.target = options.target;
  report.radius = options.radius;
  report.alpha = s.alpha;
  report.floor_mix = s.beta;
  report.lambda = solver.gap().lambda;
  report.seeds = end.count();
  report.exits = end.exits;
  report.reached.assign(report.seeds, 0);
  report.terminal.assign(report.seeds, 0);
  const double r2 = options.radius * options.radius;
  std::size_t hits = 0, terminal_hits = 0;
  for (std::size_t p = 0; p < report.seeds; ++p) {
    for (std::size_t k = 0; k < end.snapshots; ++k) {
      if (squared_distance(end.snapshot(p, k), options.target) <= r2) {
        report.reached[p] = 1;
        break;
      }
    }
    report.terminal[p] = squared_distance(end.position(p), options.target) <= r2;
    hits += report.reached[p];
    terminal_hits += report.terminal[p];
  }
  report.fraction = static_cast<double>(hits) / static_cast<double>(report.seeds);
  report.fraction_terminal = static_cast<double>(terminal_hits) / static_cast<double>(report.seeds);
  report.ensemble = std::move(end);
  return report;
}

ReverseReachReport reverse_reach(const VectorFieldSet& fields, const GridDomain& grid, const DiscreteOperator& op,
                                 const ReachOptions& options, std::size_t particles, std::uint64_t seed) {
  ReachSetup s = reach_setup(grid, options);
  const PoissonSolver solver = certified_solver(op, options.poisson);
  const Eigen::VectorXd f = steering_potential(solver, *s.rho1, *s.rho0, s.c);
  const ControlField controls = steering_controls(op, f, *s.rho1, *s.rho0, uniform_times(options.steps), s.c);

  const double r2 = options.radius * options.radius;
  Eigen::VectorXd restricted = s.rho1->values();
  for (long a = 0; a < restricted.size(); ++a) {
    if (squared_distance(grid.point(static_cast<std::size_t>(a)), options.target) > r2) restricted[a] = 0.0;
  }
  const DensityField seed_density = DensityField::normalized(grid, restricted);
  IntegrateOptions integrate;
  integrate.substeps = options.substeps;
  integrate.store_trajectories = true;
  integrate.threads = options.threads;
  const ParticleEnsemble end =
      integrate_ensemble(sample_density(seed_density, particles, seed), controls, fields, integrate);

  std::vector<std::uint8_t> admissible(grid.cell_count(), 0), visited(grid.cell_count(), 0);
  const auto uniform_mass = cell_masses(*s.rho0);
  for (std::size_t c = 0; c < admissible.size(); ++c) admissible[c] = uniform_mass[c] > 0.0;
  for (std::size_t p = 0; p < end.count(); ++p) {
    for (std::size_t k = 0; k < end.snapshots; ++k) visited[grid.cell_of_point(end.snapshot(p, k))] = 1;
  }
  std::size_t total = 0, covered = 0;
  for (std::size_t c = 0; c < admissible.size(); ++c) {
    total += admissible[c];
    covered += admissible[c] && visited[c];
  }
  ReverseReachReport report;
  report.coverage = static_cast<double>(covered) / static_cast<double>(total);
  report.particles = end.count();
  report.exits = end.exits;
  return report;
}

double invariance_defect(const VectorFieldSet& fields, const GridDomain& grid, std::span<const std::uint8_t> xi,
                         const InvarianceOptions& options) {
  if (xi.size() != grid.active_count()) throw ConfigError("indicator size does not match the grid");
  const int d = grid.dimension();
  const auto n = static_cast<std::size_t>(d);
  double tau = 0.0;
  if (options.tau) {
    tau = *options.tau;
  } else {
    double extent = std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j) extent = std::min(extent, grid.upper()[j] - grid.lower()[j]);
    double norm = 0.0;
    std::vector<double> g(n);
    for (std::size_t a = 0; a < grid.active_count(); ++a) {
      const auto x = grid.point(a);
      for (int i = 0; i < fields.count(); ++i) {
        fields.evaluate(i, x, g);
        double s = 0.0;
        for (double c : g) s += c * c;
        norm = std::max(norm, std::sqrt(s));
      }
    }
    tau = 0.05 * extent / (norm > 0.0 ? norm : 1.0);
  }
  std::mt19937_64 rng(options.seed);
  std::vector<double> x(n), y(n), k1(n), k2(n), k3(n), k4(n), z(n);
  double defect = 0.0;
  for (std::size_t s = 0; s < options.samples && defect < 1.0; ++s) {
    for (int j = 0; j < d; ++j) x[j] = grid.lower()[j] + uniform01(rng) * (grid.upper()[j] - grid.lower()[j]);
    const int here = xi[grid.nearest_active(x)];
    for (int i = 0; i < fields.count(); ++i) {
      for (const double sign : {1.0, -1.0}) {
        const double h = sign * tau / options.flow_steps;
        y = x;
        auto eval = [&](std::vector<double> p, std::vector<double>& out) {
          grid.clamp(p);
          fields.evaluate(i, p, out);
        };
        for (int step = 0; step < options.flow_steps; ++step) {
          eval(y, k1);
          for (std::size_t j = 0; j < n; ++j) z[j] = y[j] + 0.5 * h * k1[j];
          eval(z, k2);
          for (std::size_t j = 0; j < n; ++j) z[j] = y[j] + 0.5 * h * k2[j];
          eval(z, k3);
          for (std::size_t j = 0; j < n; ++j) z[j] = y[j] + h * k3[j];
          eval(z, k4);
          for (std::size_t j = 0; j < n; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
          grid.clamp(y);
        }
        const int there = xi[grid.nearest_active(y)];
        defect = std::max(defect, std::abs(static_cast<double>(there - here)));
      }
    }
  }
  return defect;
}

std::vector<InvariantSet> detect_invariant_sets(const DiscreteOperator& op, const GridDomain& grid,
                                                const VectorFieldSet& fields, double tol,
                                                const SpectralOptions& spectral,
                                                const InvarianceOptions& invariance) {
  const auto basis = kernel_basis(op, tol, spectral.kernel_max, spectral);
  const long n = op.size();
  std::set<std::vector<std::uint8_t>> seen;
  std::vector<InvariantSet> out;
  for (const auto& v : basis) {
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0L);
    std::stable_sort(order.begin(), order.end(), [&v](long a, long b) { return v[a] < v[b]; });
    const double half = 0.5 * op.mass.sum();
    double acc = 0.0, median = v[order.back()];
    for (long a : order) {
      acc += op.mass[a];
      if (acc >= half) {
        median = v[a];
        break;
      }
    }
    const double slack = 1e-6 * (v.maxCoeff() - v.minCoeff());
    std::vector<std::uint8_t> xi(static_cast<std::size_t>(n));
    auto threshold = [&](double level) {
      long members = 0;
      for (long a = 0; a < n; ++a) members += xi[a] = v[a] > level;
      return members > 0 && members < n;
    };
    if (!threshold(median + slack) && !threshold(median - slack)) continue;
    if (xi[0]) {
      for (auto& b : xi) b = !b;
    }
    if (!seen.insert(xi).second) continue;
    InvariantSet set;
    set.defect = invariance_defect(fields, grid, xi, invariance);
    for (long a = 0; a < n; ++a) set.mass += xi[a] ? op.mass[a] / (op.weight ? (*op.weight)[a] : 1.0) : 0.0;
    set.indicator = std::move(xi);
    out.push_back(std::move(set));
  }
  return out;
}

SliceFlow slice_mass_flow(const GridDomain& grid, int axis, const ParticleEnsemble& initial,
                          const ParticleEnsemble& terminal) {
  if (axis < 0 || axis >= grid.dimension()) throw ConfigError("slice axis out of range");
  if (initial.count() != terminal.count() || initial.dimension != grid.dimension() ||
      terminal.dimension != grid.dimension()) {
    throw ConfigError("ensembles do not match");
  }
  const int layers = grid.counts()[axis] - 1;
  auto layer = [&](std::span<const double> x) {
    const double s = (x[axis] - grid.lower()[axis]) / grid.spacing()[axis];
    return std::clamp(static_cast<int>(std::floor(s)), 0, layers - 1);
  };
  SliceFlow flow;
  flow.initial.assign(static_cast<std::size_t>(layers), 0);
  flow.terminal.assign(static_cast<std::size_t>(layers), 0);
  for (std::size_t p = 0; p < initial.count(); ++p) {
    const int a = layer(initial.position(p)), b = layer(terminal.position(p));
    ++flow.initial[a];
    ++flow.terminal[b];
    flow.crossings += a != b;
  }
  flow.max_excess = std::numeric_limits<long>::min();
  for (int l = 0; l < layers; ++l) flow.max_excess = std::max(flow.max_excess, flow.terminal[l] - flow.initial[l]);
  return flow;
}

}  // namespace subctrl
