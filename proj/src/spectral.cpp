#include "subctrl/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "subctrl/errors.hpp"

namespace subctrl {

Eigen::VectorXd project_mean_zero(const Eigen::VectorXd& v, const Eigen::VectorXd& mass) {
  const double mean = mass.dot(v) / mass.sum();
  return v.array() - mean;
}

double absolute_gap_floor(const DiscreteOperator& op, double relative) {
  return relative * op.gershgorin_bound();
}

namespace {

// Lanczos on T = M^{1/2} (L + sigma M)^{-1} M^{1/2}, whose largest eigenvalues
// theta correspond to the smallest lambda = 1/theta - sigma of (L, M). Vectors
// live in the scaled coordinates y = M^{1/2} v, where the M-inner product is
// Euclidean.
class ShiftInvertLanczos {
 public:
  struct Pair {
    double lambda = 0.0;
    Eigen::VectorXd v;  // original coordinates, M-normalized
    double residual = 0.0;
    int iterations = 0;
    int restarts = 0;
    std::vector<double> history;
  };

  ShiftInvertLanczos(const DiscreteOperator& op, const SpectralOptions& options)
      : op_(op), options_(options), rng_(options.seed) {
    sqrt_mass_ = op.mass.cwiseSqrt();
    const double bound = op.gershgorin_bound();
    shift_ = bound > 0.0 ? 1e-6 * bound : 1.0;
    Eigen::SparseMatrix<double> shifted = op.stiffness;
    for (long j = 0; j < op.size(); ++j) shifted.coeffRef(j, j) += shift_ * op.mass[j];
    const long n = op.size();
    if (static_cast<long>(op.elimination_order.size()) == n) {
      permutation_.resize(n);
      for (long i = 0; i < n; ++i) permutation_.indices()[op.elimination_order[i]] = static_cast<int>(i);
      Eigen::SparseMatrix<double> permuted;
      permuted = shifted.twistedBy(permutation_);
      nested_.compute(permuted);
      use_nested_ = true;
    } else {
      factor_.compute(shifted);
    }
    if ((use_nested_ ? nested_.info() : factor_.info()) != Eigen::Success) {
      throw SolverError("factorization of the shifted operator failed", 0.0);
    }
    constant_ = sqrt_mass_ / sqrt_mass_.norm();
  }

  // Smallest eigenpair M-orthogonal to constants and to `deflated`
  // (M-orthonormal vectors in original coordinates).
  Pair smallest(const std::vector<Eigen::VectorXd>& deflated) {
    std::vector<Eigen::VectorXd> locked{constant_};
    for (const auto& v : deflated) locked.push_back(sqrt_mass_.cwiseProduct(v));
    const long n = op_.size();
    const long room = n - static_cast<long>(locked.size());
    if (room <= 0) throw SolverError("no room left for another eigenvector", 0.0);
    const int max_k = static_cast<int>(std::min<long>(options_.max_krylov, room));

    Pair best;
    best.residual = std::numeric_limits<double>::infinity();
    Eigen::VectorXd start = random_vector(n);
    int restarts = 0;
    int total_steps = 0;
    for (;;) {
      Eigen::MatrixXd basis(n, max_k);
      std::vector<double> alpha, beta;
      Eigen::VectorXd q = start;
      orthogonalize(q, locked, basis, 0);
      if (q.norm() < 1e-12) q = random_vector(n), orthogonalize(q, locked, basis, 0);
      basis.col(0) = q / q.norm();
      bool breakdown = false;
      int k = 0;
      Eigen::VectorXd ritz;
      double theta = 0.0;
      for (k = 0; k < max_k; ++k) {
        ++total_steps;
        Eigen::VectorXd w = apply_shift_invert(basis.col(k));
        const double a = basis.col(k).dot(w);
        w -= a * basis.col(k);
        if (k > 0) w -= beta.back() * basis.col(k - 1);
        orthogonalize(w, locked, basis, k + 1);
        orthogonalize(w, locked, basis, k + 1);
        alpha.push_back(a);
        const double b = w.norm();

        const int m = k + 1;
        Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) tri(i, i) = alpha[i];
        for (int i = 0; i + 1 < m; ++i) tri(i, i + 1) = tri(i + 1, i) = beta[i];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(tri);
        theta = eig.eigenvalues()[m - 1];
        const Eigen::VectorXd s = eig.eigenvectors().col(m - 1);
        const double lambda_estimate = 1.0 / theta - shift_;
        best.history.push_back(lambda_estimate);
        const double estimate = std::abs(b * s[m - 1]) / theta * (std::abs(lambda_estimate) + shift_);

        breakdown = b <= 1e-13 * std::abs(theta);
        const bool check = breakdown || k + 1 == max_k || estimate <= options_.tolerance || (k + 1) % 10 == 0;
        if (check) {
          ritz = basis.leftCols(m) * s;
          Pair candidate = finish(ritz);
          if (candidate.residual < best.residual) {
            candidate.history = std::move(best.history);
            best = std::move(candidate);
            best.history.reserve(best.history.size());
          }
          if (best.residual <= options_.tolerance) {
            best.iterations = total_steps;
            best.restarts = restarts;
            return best;
          }
        }
        if (breakdown) break;
        beta.push_back(b);
        if (k + 1 < max_k) basis.col(k + 1) = w / b;
      }
      if (++restarts > options_.max_restarts) {
        std::ostringstream msg;
        msg << "Lanczos did not reach eigen-residual " << options_.tolerance << " after "
            << options_.max_restarts << " restarts (best residual " << best.residual << ")";
        throw SolverError(msg.str(), best.residual);
      }
      // A breakdown means the Krylov space is exhausted: start afresh.
      // Otherwise continue from the best Ritz vector of this cycle.
      start = breakdown ? random_vector(n) : Eigen::VectorXd(ritz);
    }
  }

 private:
  Eigen::VectorXd random_vector(long n) {
    Eigen::VectorXd v(n);
    for (long j = 0; j < n; ++j) {
      v[j] = static_cast<double>(rng_() >> 11) * 0x1.0p-53 - 0.5;
    }
    return v;
  }

  void orthogonalize(Eigen::VectorXd& w, const std::vector<Eigen::VectorXd>& locked,
                     const Eigen::MatrixXd& basis, int used) const {
    for (const auto& q : locked) w -= q.dot(w) * q;
    if (used > 0) {
      const Eigen::VectorXd c = basis.leftCols(used).transpose() * w;
      w -= basis.leftCols(used) * c;
    }
  }

  Eigen::VectorXd apply_shift_invert(const Eigen::VectorXd& y) const {
    const Eigen::VectorXd rhs = sqrt_mass_.cwiseProduct(y);
    const Eigen::VectorXd x = use_nested_ ? Eigen::VectorXd(permutation_.transpose() * nested_.solve(permutation_ * rhs))
                                          : Eigen::VectorXd(factor_.solve(rhs));
    return sqrt_mass_.cwiseProduct(x);
  }

  // Converts a scaled Ritz vector to an M-normalized mean-zero eigenvector
  // estimate with its Rayleigh quotient and explicit residual.
  Pair finish(const Eigen::VectorXd& scaled) const {
    Pair p;
    Eigen::VectorXd v = scaled.cwiseQuotient(sqrt_mass_);
    v = project_mean_zero(v, op_.mass);
    v /= std::sqrt(v.dot(op_.mass.cwiseProduct(v)));
    const Eigen::VectorXd lv = op_.stiffness * v;
    p.lambda = v.dot(lv);
    const Eigen::VectorXd r = lv - p.lambda * op_.mass.cwiseProduct(v);
    p.residual = std::sqrt(r.dot(r.cwiseQuotient(op_.mass)));
    p.v = std::move(v);
    return p;
  }

  const DiscreteOperator& op_;
  SpectralOptions options_;
  std::mt19937_64 rng_;
  Eigen::VectorXd sqrt_mass_;
  Eigen::VectorXd constant_;
  double shift_ = 1.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> nested_;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> permutation_;
  bool use_nested_ = false;
};

std::vector<Eigen::VectorXd> collect_kernel(ShiftInvertLanczos& lanczos, const Eigen::VectorXd& mass,
                                            double tol, std::size_t kmax) {
  std::vector<Eigen::VectorXd> found;
  while (found.size() < kmax) {
    ShiftInvertLanczos::Pair pair;
    try {
      pair = lanczos.smallest(found);
    } catch (const SolverError&) {
      if (found.empty()) throw;
      break;
    }
    if (pair.lambda > tol) break;
    Eigen::VectorXd v = pair.v;
    for (const auto& q : found) v -= q.dot(mass.cwiseProduct(v)) * q;
    v = project_mean_zero(v, mass);
    const double norm = std::sqrt(v.dot(mass.cwiseProduct(v)));
    if (norm < 1e-8) break;
    found.push_back(v / norm);
  }
  return found;
}

}  // namespace

SpectralReport spectral_gap(const DiscreteOperator& op, const SpectralOptions& options) {
  if (op.size() < 2) throw ConfigError("operator needs at least two nodes");
  ShiftInvertLanczos lanczos(op, options);
  auto pair = lanczos.smallest({});
  SpectralReport report;
  report.lambda = pair.lambda;
  report.eigenvector = std::move(pair.v);
  report.residual = pair.residual;
  report.iterations = pair.iterations;
  report.restarts = pair.restarts;
  report.ritz_history = std::move(pair.history);
  report.floor = absolute_gap_floor(op, options.gap_floor);
  if (report.lambda <= report.floor) {
    report.kernel_dim = collect_kernel(lanczos, op.mass, report.floor, options.kernel_max).size();
  }
  return report;
}

std::vector<Eigen::VectorXd> kernel_basis(const DiscreteOperator& op, double tol, std::size_t kmax,
                                          const SpectralOptions& options) {
  if (kmax == 0) return {};
  ShiftInvertLanczos lanczos(op, options);
  return collect_kernel(lanczos, op.mass, tol, kmax);
}

double poincare_ratio(const DiscreteOperator& op, const Eigen::VectorXd& f) {
  if (f.size() != op.size()) throw ConfigError("vector length does not match operator size");
  const Eigen::VectorXd centered = project_mean_zero(f, op.mass);
  const double denom = centered.dot(op.mass.cwiseProduct(centered));
  const double scale = f.dot(op.mass.cwiseProduct(f));
  if (!(denom > 1e-24 * std::max(scale, 1e-300))) {
    throw ConfigError("Poincare ratio is undefined for a constant function");
  }
  return f.dot(op.stiffness * f) / denom;
}

PoissonSolver::PoissonSolver(const DiscreteOperator& op, PoissonOptions options)
    : op_(&op), options_(options) {
  gap_ = spectral_gap(op, options_.spectral);
  if (!gap_.certified()) {
    std::ostringstream msg;
    msg << "system not certifiably controllable: spectral gap " << gap_.lambda << " <= floor "
        << gap_.floor << ", near-kernel dimension " << gap_.kernel_dim;
    throw NotControllableError(msg.str(), gap_.lambda, gap_.kernel_dim);
  }
  inverse_diagonal_ = op.stiffness.diagonal();
  for (long j = 0; j < inverse_diagonal_.size(); ++j) {
    inverse_diagonal_[j] = inverse_diagonal_[j] > 0.0 ? 1.0 / inverse_diagonal_[j] : 1.0;
  }
}

PoissonResult PoissonSolver::solve(const Eigen::VectorXd& rhs) const {
  const DiscreteOperator& op = *op_;
  if (rhs.size() != op.size()) throw ConfigError("right-hand side length does not match operator size");
  const long n = op.size();
  auto project_range = [n](Eigen::VectorXd& r) { r.array() -= r.sum() / static_cast<double>(n); };

  Eigen::VectorXd b = rhs;
  project_range(b);
  PoissonResult result;
  result.solution = Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return result;
  const double target = options_.tolerance * bnorm;

  Eigen::VectorXd& x = result.solution;
  for (int cycle = 0; cycle < 4; ++cycle) {
    Eigen::VectorXd r = b - op.stiffness * x;
    project_range(r);
    Eigen::VectorXd z = inverse_diagonal_.cwiseProduct(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    while (r.norm() > target && result.iterations < options_.max_iterations) {
      const Eigen::VectorXd q = op.stiffness * p;
      const double step = rz / p.dot(q);
      x += step * p;
      r -= step * q;
      project_range(r);
      x = project_mean_zero(x, op.mass);
      z = inverse_diagonal_.cwiseProduct(r);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
      ++result.iterations;
    }
    x = project_mean_zero(x, op.mass);
    result.relative_residual = (op.stiffness * x - b).norm() / bnorm;
    if (result.relative_residual <= options_.tolerance) return result;
    if (result.iterations >= options_.max_iterations) break;
  }
  std::ostringstream msg;
  msg << "conjugate gradients did not converge: relative residual " << result.relative_residual
      << " after " << result.iterations << " iterations";
  throw SolverError(msg.str(), result.relative_residual);
}

Eigen::VectorXd solve_poisson(const DiscreteOperator& op, const Eigen::VectorXd& rhs,
                              const PoissonOptions& options) {
  return PoissonSolver(op, options).solve(rhs).solution;
}

}  // namespace subctrl
