#include "subctrl/control.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "subctrl/errors.hpp"

namespace subctrl {

namespace {

void require_same_grid(const GridDomain& a, const GridDomain& b) {
  if (&a != &b && !(a == b)) throw ConfigError("densities live on different grids");
}

Eigen::MatrixXd controls_from(const DiscreteOperator& op, const Eigen::VectorXd& f, const Eigen::VectorXd& rho) {
  Eigen::MatrixXd u(op.size(), static_cast<long>(op.directional.size()));
  for (std::size_t i = 0; i < op.directional.size(); ++i) {
    u.col(static_cast<long>(i)) = op.directional[i].apply(f).cwiseQuotient(rho);
  }
  return u;
}

}  // namespace

ControlField::ControlField(const GridDomain& grid, std::vector<double> times, std::vector<Eigen::VectorXd> densities,
                           std::vector<Eigen::VectorXd> potentials, std::vector<Eigen::MatrixXd> controls,
                           double floor)
    : grid_(&grid),
      times_(std::move(times)),
      densities_(std::move(densities)),
      potentials_(std::move(potentials)),
      controls_(std::move(controls)),
      floor_(floor) {
  if (times_.size() < 2) throw ConfigError("time grid needs at least two points");
  if (times_.front() != 0.0 || times_.back() != 1.0) throw ConfigError("time grid must run from 0 to 1");
  for (std::size_t k = 1; k < times_.size(); ++k) {
    if (!(times_[k] > times_[k - 1])) throw ConfigError("time grid must be strictly increasing");
  }
  if (controls_.size() != times_.size() || densities_.size() != times_.size()) {
    throw ConfigError("controls and densities need one entry per time point");
  }
  const long n = static_cast<long>(grid.active_count());
  const long m = controls_.front().cols();
  if (m < 1) throw ConfigError("control field needs at least one control");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (controls_[k].rows() != n || controls_[k].cols() != m || densities_[k].size() != n) {
      throw ConfigError("control or density size does not match the grid at time index " + std::to_string(k));
    }
    if (!controls_[k].allFinite()) {
      throw ConfigError("non-finite control value at time index " + std::to_string(k));
    }
  }
}

double ControlField::max_abs() const {
  double out = 0.0;
  for (const auto& u : controls_) out = std::max(out, u.cwiseAbs().maxCoeff());
  return out;
}

void ControlField::write_csv(std::size_t k, std::ostream& out) const {
  const Eigen::MatrixXd& u = controls_.at(k);
  out << "index";
  for (long i = 0; i < u.cols(); ++i) out << ",u_" << i + 1;
  out << '\n';
  out.precision(17);
  for (long r = 0; r < u.rows(); ++r) {
    out << r;
    for (long i = 0; i < u.cols(); ++i) out << ',' << u(r, i);
    out << '\n';
  }
}

std::vector<double> uniform_times(int steps) {
  if (steps < 1) throw ConfigError("number of time steps must be at least 1");
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) t[static_cast<std::size_t>(k)] = static_cast<double>(k) / steps;
  t.back() = 1.0;
  return t;
}

double default_density_floor(const GridDomain& grid) { return 1e-3 / grid.box_volume(); }

DensityField interpolate_density(const DensityField& rho0, const DensityField& rho1, double t) {
  require_same_grid(rho0.grid(), rho1.grid());
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("interpolation time must lie in [0, 1]");
  if (t == 0.0) return rho0;
  if (t == 1.0) return rho1;
  return DensityField(rho0.grid(), rho0.values() + t * (rho1.values() - rho0.values()));
}

void check_density_floor(const DensityField& rho, double c, const char* label) {
  if (!(c > 0.0)) throw ConfigError("density floor c must be positive");
  const Eigen::VectorXd& v = rho.values();
  for (long j = 0; j < v.size(); ++j) {
    if (v[j] < c) {
      std::ostringstream msg;
      msg << label << " falls below the density floor " << c << " at node " << j << " (value " << v[j] << ")";
      throw DensityFloorError(msg.str());
    }
  }
}

Eigen::VectorXd steering_potential(const PoissonSolver& solver, const DensityField& rho0, const DensityField& rho1,
                                   double c) {
  require_same_grid(rho0.grid(), rho1.grid());
  const DiscreteOperator& op = solver.op();
  if (rho0.values().size() != op.size()) throw ConfigError("density size does not match the operator");
  check_density_floor(rho0, c, "rho0");
  check_density_floor(rho1, c, "rho1");
  const Eigen::VectorXd rhs = op.mass.cwiseProduct(rho1.values() - rho0.values());
  return solver.solve(rhs).solution;
}

ControlField steering_controls(const DiscreteOperator& op, const Eigen::VectorXd& f, const DensityField& rho0,
                               const DensityField& rho1, const std::vector<double>& times, double c) {
  require_same_grid(rho0.grid(), rho1.grid());
  if (f.size() != op.size() || rho0.values().size() != op.size()) {
    throw ConfigError("potential or density size does not match the operator");
  }
  std::vector<Eigen::VectorXd> densities;
  std::vector<Eigen::MatrixXd> controls;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    Eigen::VectorXd rho = t == 1.0 ? rho1.values() : Eigen::VectorXd(rho0.values() + t * (rho1.values() - rho0.values()));
    if (const double low = rho.minCoeff(); !(low >= c)) {
      std::ostringstream msg;
      msg << "interpolated density at time index " << k << " falls below the density floor " << c;
      throw DensityFloorError(msg.str());
    }
    controls.push_back(controls_from(op, f, rho));
    densities.push_back(std::move(rho));
  }
  return ControlField(rho0.grid(), times, std::move(densities), {f}, std::move(controls), c);
}

Eigen::VectorXd time_derivative(const std::vector<Eigen::VectorXd>& path, const std::vector<double>& times,
                                std::size_t k) {
  const std::size_t n = times.size();
  if (n < 2 || path.size() != n || k >= n) throw ConfigError("time derivative needs a path of at least two samples");
  if (n == 2) return (path[1] - path[0]) / (times[1] - times[0]);
  if (k == 0) {
    const double h1 = times[1] - times[0], h2 = times[2] - times[1];
    return -(2 * h1 + h2) / (h1 * (h1 + h2)) * path[0] + (h1 + h2) / (h1 * h2) * path[1] -
           h1 / (h2 * (h1 + h2)) * path[2];
  }
  if (k == n - 1) {
    const double h1 = times[n - 2] - times[n - 3], h2 = times[n - 1] - times[n - 2];
    return h2 / (h1 * (h1 + h2)) * path[n - 3] - (h1 + h2) / (h1 * h2) * path[n - 2] +
           (2 * h2 + h1) / (h2 * (h1 + h2)) * path[n - 1];
  }
  const double h1 = times[k] - times[k - 1], h2 = times[k + 1] - times[k];
  return -h2 / (h1 * (h1 + h2)) * path[k - 1] + (h2 - h1) / (h1 * h2) * path[k] +
         h1 / (h2 * (h1 + h2)) * path[k + 1];
}

ControlField tracking_controls(const PoissonSolver& solver, const std::vector<DensityField>& path,
                               const std::vector<double>& times, double c) {
  if (path.size() != times.size() || path.size() < 2) {
    throw ConfigError("density path needs one density per time stamp and at least two stamps");
  }
  const DiscreteOperator& op = solver.op();
  std::vector<Eigen::VectorXd> densities;
  for (std::size_t k = 0; k < path.size(); ++k) {
    require_same_grid(path.front().grid(), path[k].grid());
    if (path[k].values().size() != op.size()) throw ConfigError("density size does not match the operator");
    const std::string label = "density at time index " + std::to_string(k);
    check_density_floor(path[k], c, label.c_str());
    densities.push_back(path[k].values());
  }
  std::vector<Eigen::VectorXd> potentials;
  std::vector<Eigen::MatrixXd> controls;
  for (std::size_t k = 0; k < path.size(); ++k) {
    const Eigen::VectorXd rhs = op.mass.cwiseProduct(time_derivative(densities, times, k));
    potentials.push_back(solver.solve(rhs).solution);
    controls.push_back(controls_from(op, potentials.back(), densities[k]));
  }
  return ControlField(path.front().grid(), times, std::move(densities), std::move(potentials), std::move(controls),
                      c);
}

EnergyReport energy_bound(const DiscreteOperator& op, const Eigen::VectorXd& f, double lambda, double floor,
                          const DensityField& rho0, const DensityField& rho1) {
  if (!(lambda > floor)) {
    std::ostringstream msg;
    msg << "energy bound needs a certified gap: lambda " << lambda << " <= floor " << floor;
    throw NotControllableError(msg.str(), lambda, 0);
  }
  if (f.size() != op.size()) throw ConfigError("potential size does not match the operator");
  require_same_grid(rho0.grid(), rho1.grid());
  EnergyReport report;
  for (const auto& dir : op.directional) {
    const Eigen::VectorXd df = dir.apply(f);
    report.lhs += df.dot(op.mass.cwiseProduct(df));
  }
  const Eigen::VectorXd diff = rho1.values() - rho0.values();
  report.rhs = diff.dot(op.mass.cwiseProduct(diff)) / lambda;
  report.ratio = report.rhs > 0.0 ? report.lhs / report.rhs : 0.0;
  report.holds = report.lhs <= report.rhs * (1.0 + 1e-6);
  return report;
}

double continuity_residual(const ControlField& controls, const DiscreteOperator& op) {
  const auto& densities = controls.densities();
  const auto& times = controls.times();
  if (controls.field_count() != static_cast<int>(op.directional.size()) ||
      controls.controls(0).rows() != op.size()) {
    throw ConfigError("control field does not match the operator");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    Eigen::VectorXd r = op.mass.cwiseProduct(time_derivative(densities, times, k));
    for (std::size_t i = 0; i < op.directional.size(); ++i) {
      const Eigen::VectorXd flux = controls.controls(k).col(static_cast<long>(i)).cwiseProduct(densities[k]);
      r -= op.directional[i].apply_transpose(op.mass.cwiseProduct(flux));
    }
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace subctrl
