#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "subctrl/operators.hpp"

namespace subctrl {

struct SpectralOptions {
  /// Absolute eigen-residual target, measured as ||L v - lambda M v||_{M^-1}.
  double tolerance = 1e-8;
  /// Krylov dimension per Lanczos cycle.
  int max_krylov = 300;
  /// Random restarts allowed after a breakdown or an unconverged cycle.
  int max_restarts = 5;
  /// Floor relative to the Gershgorin bound of M^-1 L; gaps at or below it are
  /// "not certifiably controllable".
  double gap_floor = 1e-9;
  /// Cap on the near-kernel basis computed for the report.
  std::size_t kernel_max = 16;
  std::uint64_t seed = 20240611;
};

struct SpectralReport {
  double lambda = 0.0;
  Eigen::VectorXd eigenvector;  // M-normalized and M-mean-zero
  double residual = 0.0;
  double floor = 0.0;  // absolute gap floor
  std::size_t kernel_dim = 0;
  int iterations = 0;
  int restarts = 0;
  std::vector<double> ritz_history;  // best Ritz value after each Lanczos step

  bool certified() const { return lambda > floor; }
};

/// v - (1^T M v / 1^T M 1) 1.
Eigen::VectorXd project_mean_zero(const Eigen::VectorXd& v, const Eigen::VectorXd& mass);

/// Absolute floor = relative * gershgorin_bound().
double absolute_gap_floor(const DiscreteOperator& op, double relative);

/// Smallest generalized eigenvalue of (L, M) on the M-mean-zero subspace.
///
/// Lanczos in the M-inner product with the constant vector deflated and full
/// reorthogonalization, run on the shift-inverted operator (L + sigma M)^-1 M
/// so that the low end of the spectrum converges in a few dozen steps. The
/// report also carries the near-kernel dimension at the gap floor.
/// Throws SolverError after max_restarts failed cycles.
SpectralReport spectral_gap(const DiscreteOperator& op, const SpectralOptions& options = {});

/// M-orthonormal mean-zero vectors with Rayleigh quotient <= tol, at most kmax.
/// Empty iff the gap exceeds tol.
std::vector<Eigen::VectorXd> kernel_basis(const DiscreteOperator& op, double tol, std::size_t kmax,
                                          const SpectralOptions& options = {});

/// (f^T L f) / (f~^T M f~) with f~ the mean-zero projection of f. Throws
/// ConfigError when f is constant.
double poincare_ratio(const DiscreteOperator& op, const Eigen::VectorXd& f);

struct PoissonOptions {
  double tolerance = 1e-10;  // relative residual ||L f - rhs|| / ||rhs||
  int max_iterations = 20000;
  SpectralOptions spectral;
};

struct PoissonResult {
  Eigen::VectorXd solution;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Solves L f = rhs on the mean-zero subspace by Jacobi-preconditioned
/// conjugate gradients with per-iteration projection.
///
/// Construction certifies the operator: it computes the spectral gap once and
/// throws NotControllableError when the gap is at or below the floor. The
/// solver can then be reused for many right-hand sides.
class PoissonSolver {
 public:
  PoissonSolver(const DiscreteOperator& op, PoissonOptions options = {});

  /// `rhs` must sum to zero (it is M g for an M-mean-zero g); the residual
  /// component along the constant vector is removed internally. Throws
  /// SolverError on non-convergence.
  PoissonResult solve(const Eigen::VectorXd& rhs) const;

  const SpectralReport& gap() const { return gap_; }
  const DiscreteOperator& op() const { return *op_; }
  const PoissonOptions& options() const { return options_; }

 private:
  const DiscreteOperator* op_;
  PoissonOptions options_;
  SpectralReport gap_;
  Eigen::VectorXd inverse_diagonal_;
};

/// One-shot convenience around PoissonSolver.
Eigen::VectorXd solve_poisson(const DiscreteOperator& op, const Eigen::VectorXd& rhs,
                              const PoissonOptions& options = {});

}  // namespace subctrl
