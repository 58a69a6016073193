#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <vector>

#include "subctrl/grid.hpp"
#include "subctrl/operators.hpp"
#include "subctrl/spectral.hpp"

namespace subctrl {

/// Nodal feedback controls u_i(t_k, node) on a time grid 0 = t_0 < ... < t_K = 1,
/// together with the density path and potentials they were built from.
/// Immutable after construction.
class ControlField {
 public:
  /// `controls[k]` is an N x m matrix, `densities[k]` the nodal density at t_k.
  /// `potentials` holds one vector (steering) or one per time step (tracking);
  /// it may be empty for hand-supplied controls. Throws ConfigError on
  /// inconsistent sizes, a bad time grid or non-finite controls.
  ControlField(const GridDomain& grid, std::vector<double> times, std::vector<Eigen::VectorXd> densities,
               std::vector<Eigen::VectorXd> potentials, std::vector<Eigen::MatrixXd> controls, double floor);

  const GridDomain& grid() const { return *grid_; }
  std::size_t steps() const { return times_.size() - 1; }
  int field_count() const { return static_cast<int>(controls_.front().cols()); }
  const std::vector<double>& times() const { return times_; }
  const Eigen::MatrixXd& controls(std::size_t k) const { return controls_[k]; }
  const Eigen::VectorXd& density(std::size_t k) const { return densities_[k]; }
  const std::vector<Eigen::VectorXd>& densities() const { return densities_; }
  const std::vector<Eigen::VectorXd>& potentials() const { return potentials_; }
  double floor() const { return floor_; }
  double max_abs() const;

  /// CSV `index,u_1..u_m` for time step k.
  void write_csv(std::size_t k, std::ostream& out) const;

 private:
  const GridDomain* grid_;
  std::vector<double> times_;
  std::vector<Eigen::VectorXd> densities_;
  std::vector<Eigen::VectorXd> potentials_;
  std::vector<Eigen::MatrixXd> controls_;
  double floor_;
};

/// K uniform steps on [0, 1]; K >= 1.
std::vector<double> uniform_times(int steps);

/// c = 1e-3 / vol(box).
double default_density_floor(const GridDomain& grid);

/// rho_0 + t (rho_1 - rho_0). Throws ConfigError on a grid mismatch or t outside [0, 1].
DensityField interpolate_density(const DensityField& rho0, const DensityField& rho1, double t);

/// Throws DensityFloorError naming the first node where rho < c.
void check_density_floor(const DensityField& rho, double c, const char* label);

/// Potential f with L f = M (rho_1 - rho_0), M-mean-zero. The solver
/// certifies the gap; densities are checked against the floor c first.
Eigen::VectorXd steering_potential(const PoissonSolver& solver, const DensityField& rho0,
                                   const DensityField& rho1, double c);

/// u_i(t_k) = (D_i f) / rho(t_k) along the linear interpolant.
ControlField steering_controls(const DiscreteOperator& op, const Eigen::VectorXd& f, const DensityField& rho0,
                               const DensityField& rho1, const std::vector<double>& times, double c);

/// Second-order finite difference in time of a nodal path at t_k (three-point
/// central in the interior, three-point one-sided at the ends, two-point when
/// the path has only two samples).
Eigen::VectorXd time_derivative(const std::vector<Eigen::VectorXd>& path, const std::vector<double>& times,
                                std::size_t k);

/// Exact tracking: per time step, L f_k = M d/dt rho(t_k) and
/// u_i(t_k) = (D_i f_k) / rho(t_k). Throws DensityFloorError naming the time
/// index of the first density below c.
ControlField tracking_controls(const PoissonSolver& solver, const std::vector<DensityField>& path,
                               const std::vector<double>& times, double c);

struct EnergyReport {
  double lhs = 0.0;    // f^T L f
  double rhs = 0.0;    // (1/lambda) (rho_1 - rho_0)^T M (rho_1 - rho_0)
  double ratio = 0.0;  // lhs / rhs, the steering-effort index (0 when rhs = 0)
  bool holds = true;   // lhs <= rhs (1 + 1e-6)
};

/// Throws NotControllableError when lambda is at or below `floor`.
EnergyReport energy_bound(const DiscreteOperator& op, const Eigen::VectorXd& f, double lambda, double floor,
                          const DensityField& rho0, const DensityField& rho1);

/// max_k || M d/dt rho(t_k) - sum_i D_i^T M (u_i(t_k) o rho(t_k)) ||_inf over the
/// density path stored in the control field.
double continuity_residual(const ControlField& controls, const DiscreteOperator& op);

}  // namespace subctrl
