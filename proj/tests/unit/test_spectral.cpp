#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "subctrl/errors.hpp"
#include "subctrl/fields.hpp"
#include "subctrl/grid.hpp"
#include "subctrl/operators.hpp"
#include "subctrl/spectral.hpp"

using namespace subctrl;

namespace {

GridDomain cube(int d, double lo, double hi, int n) {
  return GridDomain::build(std::vector<double>(d, lo), std::vector<double>(d, hi), std::vector<int>(d, n));
}

double rayleigh(const DiscreteOperator& op, const Eigen::VectorXd& v) {
  return v.dot(op.apply(v)) / v.dot(op.mass.cwiseProduct(v));
}

VectorFieldSet zero_field(int d) {
  return fields_from_expressions("zero", d, {std::vector<std::string>(static_cast<std::size_t>(d), "0")});
}

}  // namespace

TEST_CASE("mean-zero projection") {
  const auto g = cube(1, 0.0, 1.0, 11);
  const Eigen::VectorXd w = quad_weights(g);
  CHECK(project_mean_zero(Eigen::VectorXd::Constant(11, 4.0), w).cwiseAbs().maxCoeff() <= 1e-15);
  const Eigen::VectorXd x = g.coordinate(0);
  const Eigen::VectorXd centered = project_mean_zero(x, w);
  CHECK((centered - (x.array() - 0.5).matrix()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((project_mean_zero(centered, w) - centered).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("axis2d gap approaches pi^2") {
  const auto g = cube(2, 0.0, 1.0, 65);
  const auto op = assemble_form_operator(g, builtin_fields("axis2d"));
  const SpectralReport r = spectral_gap(op);
  CHECK(std::abs(r.lambda - M_PI * M_PI) <= 0.02 * M_PI * M_PI);
  CHECK(r.residual <= 1e-8);
  CHECK(r.certified());
  CHECK(r.kernel_dim == 0);
  CHECK(std::abs(r.eigenvector.dot(op.mass.cwiseProduct(r.eigenvector)) - 1.0) <= 1e-10);
  CHECK(std::abs(op.mass.dot(r.eigenvector)) <= 1e-10);
  CHECK(std::abs(poincare_ratio(op, r.eigenvector) - r.lambda) <= r.residual);
  CHECK(kernel_basis(op, 1e-8, 8).empty());
}

TEST_CASE("spectral gap agrees with a dense generalized eigensolver") {
  for (const char* name : {"grushin", "heisenberg", "unicycle"}) {
    CAPTURE(name);
    const auto f = builtin_fields(name);
    const auto g = cube(f.dimension(), -1.0, 1.0, f.dimension() == 2 ? 11 : 6);
    const auto op = assemble_form_operator(g, f);
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> dense(Eigen::MatrixXd(op.stiffness),
                                                                          Eigen::MatrixXd(op.mass.asDiagonal()));
    const double expected = dense.eigenvalues()[1];
    const SpectralReport r = spectral_gap(op);
    CHECK(r.lambda == doctest::Approx(expected).epsilon(1e-7));
  }
}

TEST_CASE("axis3d-degenerate has an x3 kernel") {
  const auto g = cube(3, 0.0, 1.0, 9);
  const auto op = assemble_form_operator(g, builtin_fields("axis3d-degenerate"));
  const SpectralReport r = spectral_gap(op);
  CHECK(r.lambda <= 1e-10);
  CHECK_FALSE(r.certified());
  const auto basis = kernel_basis(op, 1e-8, 16);
  CHECK(basis.size() >= 8);
  for (const auto& v : basis) CHECK(rayleigh(op, v) <= 1e-8);
  for (std::size_t a = 0; a < basis.size(); ++a)
    for (std::size_t b = 0; b < basis.size(); ++b) {
      const double ip = basis[a].dot(op.mass.cwiseProduct(basis[b]));
      CHECK(std::abs(ip - (a == b ? 1.0 : 0.0)) <= 1e-8);
    }
}

TEST_CASE("zero field: kernel basis is capped at kmax") {
  const auto g = cube(2, 0.0, 1.0, 6);
  const auto op = assemble_form_operator(g, zero_field(2));
  const auto basis = kernel_basis(op, 1e-8, 5);
  CHECK(basis.size() == 5);
  for (const auto& v : basis) CHECK(rayleigh(op, v) == doctest::Approx(0.0));
}

TEST_CASE("poincare ratio respects the min-max principle") {
  const auto g = cube(2, 0.0, 1.0, 17);
  const auto op = assemble_form_operator(g, builtin_fields("axis2d"));
  const double lambda = spectral_gap(op).lambda;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n;
  double lowest = 1e300;
  for (int s = 0; s < 100; ++s) {
    Eigen::VectorXd f(op.size());
    for (long a = 0; a < f.size(); ++a) f[a] = n(rng);
    lowest = std::min(lowest, poincare_ratio(op, f));
  }
  CHECK(lowest >= lambda * (1 - 1e-6));
  CHECK_THROWS_AS(poincare_ratio(op, Eigen::VectorXd::Constant(op.size(), 1.0)), ConfigError);
}

TEST_CASE("heisenberg gap is stable under refinement") {
  const auto f = builtin_fields("heisenberg");
  const double coarse = spectral_gap(assemble_form_operator(cube(3, -1.0, 1.0, 17), f)).lambda;
  const double fine = spectral_gap(assemble_form_operator(cube(3, -1.0, 1.0, 33), f)).lambda;
  CHECK(coarse > 0.0);
  CHECK(std::abs(fine - coarse) / fine <= 0.10);
}

TEST_CASE("poisson solve recovers the Neumann eigenfunction") {
  const auto g = cube(2, 0.0, 1.0, 65);
  const auto op = assemble_form_operator(g, builtin_fields("axis2d"));
  const PoissonSolver solver(op);
  CHECK(solver.solve(Eigen::VectorXd::Zero(op.size())).solution.isZero(0.0));
  const Eigen::VectorXd c = (M_PI * g.coordinate(0).array()).cos();
  const PoissonResult r = solver.solve(op.mass.cwiseProduct(c));
  CHECK(r.relative_residual <= 1e-10);
  CHECK((r.solution - c / (M_PI * M_PI)).cwiseAbs().maxCoeff() <= 5e-3);
}

TEST_CASE("poisson solve on a degenerate system is not certifiable") {
  const auto g = cube(3, 0.0, 1.0, 9);
  const auto op = assemble_form_operator(g, builtin_fields("axis3d-degenerate"));
  const Eigen::VectorXd rhs = op.mass.cwiseProduct(project_mean_zero(g.coordinate(2), op.mass));
  try {
    solve_poisson(op, rhs);
    FAIL("expected NotControllableError");
  } catch (const NotControllableError& e) {
    CHECK(e.gap() <= 1e-10);
    CHECK(e.kernel_dim() >= 8);
  }
}
