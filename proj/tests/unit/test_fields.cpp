#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "subctrl/errors.hpp"
#include "subctrl/expression.hpp"
#include "subctrl/fields.hpp"

using namespace subctrl;

namespace {

std::vector<double> eval(const VectorFieldSet& f, int i, std::vector<double> x) {
  std::vector<double> out(static_cast<std::size_t>(f.dimension()));
  f.evaluate(i, x, out);
  return out;
}

}  // namespace

TEST_CASE("axis2d fields are the coordinate directions") {
  const auto f = builtin_fields("axis2d");
  CHECK(f.count() == 2);
  CHECK(eval(f, 0, {0.3, 0.7}) == std::vector<double>{1.0, 0.0});
  CHECK(eval(f, 1, {0.3, 0.7}) == std::vector<double>{0.0, 1.0});
  const Eigen::MatrixXd table = f.eval_fields(std::vector<double>{0.9, -4.0});
  CHECK(table.isApprox(Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("heisenberg fields by substitution") {
  const auto f = builtin_fields("heisenberg");
  CHECK(eval(f, 0, {1, 2, 0}) == std::vector<double>{1.0, 0.0, -1.0});
  CHECK(eval(f, 1, {1, 2, 0}) == std::vector<double>{0.0, 1.0, 0.5});
  const Eigen::MatrixXd origin = f.eval_fields(std::vector<double>{0, 0, 0});
  CHECK(origin.col(0).isApprox(Eigen::Vector3d(1, 0, 0)));
  CHECK(origin.col(1).isApprox(Eigen::Vector3d(0, 1, 0)));
}

TEST_CASE("grushin degenerates on x1 = 0") {
  const auto f = builtin_fields("grushin");
  CHECK(eval(f, 1, {0.0, 0.5}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("unicycle at heading pi/2") {
  const auto f = builtin_fields("unicycle");
  const Eigen::MatrixXd g = f.eval_fields(std::vector<double>{0.0, 0.0, M_PI / 2});
  CHECK((g.col(0) - Eigen::Vector3d(0, 1, 0)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((g.col(1) - Eigen::Vector3d(0, 0, 1)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("every builtin name resolves") {
  for (const auto& name : builtin_field_names()) {
    const auto f = builtin_fields(name);
    CHECK(f.name() == name);
    CHECK(f.count() >= 1);
  }
  CHECK_THROWS_AS(builtin_fields("nope"), ConfigError);
}

TEST_CASE("expression document matches builtin grushin") {
  const auto doc = parse_field_config("dimension = 2\nfields = [[\"1\", \"0\"], [\"0\", \"x1\"]]\n");
  const auto ref = builtin_fields("grushin");
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double diff = 0.0;
  for (int s = 0; s < 100; ++s) {
    const std::vector<double> x{u(rng), u(rng)};
    diff = std::max(diff, (doc.eval_fields(x) - ref.eval_fields(x)).cwiseAbs().maxCoeff());
  }
  CHECK(diff == 0.0);
}

TEST_CASE("field documents reject bad input") {
  CHECK_THROWS_AS(parse_field_config("dimension = 2\nfields = []\n"), ConfigError);
  CHECK_THROWS_AS(parse_field_config("dimension = 2\nfields = [[\"x3\", \"0\"]]\n"), ConfigError);
  CHECK_THROWS_AS(parse_field_config("dimension = 2\nfields = [[\"1\"]]\n"), ConfigError);
  CHECK_THROWS_AS(parse_field_config("dimension = 2\ncount = 2\nfields = [[\"1\", \"0\"]]\n"), ConfigError);
}

TEST_CASE("field documents round-trip") {
  const auto doc = parse_field_config("dimension = 3\nfields = [[\"1\", \"0\", \"-x2/2\"], [\"0\", \"1\", \"x1/2\"]]\n");
  const auto again = parse_field_config(serialize_fields(doc));
  const std::vector<double> x{0.3, -0.8, 0.1};
  CHECK(again.eval_fields(x) == doc.eval_fields(x));
  CHECK(doc.eval_fields(x).isApprox(builtin_fields("heisenberg").eval_fields(x)));
}

TEST_CASE("expression syntax errors report the offset") {
  try {
    Expression::parse("1 + * x1");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.position() == 4);
  }
  CHECK_THROWS_AS(Expression::parse("sin(x1"), SyntaxError);
  CHECK_THROWS_AS(Expression::parse("x0"), SyntaxError);
}

TEST_CASE("expression evaluation") {
  const std::vector<double> x{0.5, 2.0};
  CHECK(Expression::parse("2^3^2").evaluate(x) == doctest::Approx(512.0));
  CHECK(Expression::parse("-x1^2").evaluate(x) == doctest::Approx(-0.25));
  CHECK(Expression::parse("cos(pi*x1) + exp(0)").evaluate(x) == doctest::Approx(1.0));
  CHECK(Expression::parse("x1 + x2 <= 2.5").evaluate(x) == 1.0);
  CHECK(Expression::parse("x1 > x2").evaluate(x) == 0.0);
  CHECK(Expression::parse("x2 - 3*x1").max_variable() == 2);
}

TEST_CASE("forward-mode derivative matches central differences") {
  const Expression e = Expression::parse("sin(x1*x2) + exp(x2)/(1 + x1^2)");
  const std::vector<double> x{0.4, -0.7};
  for (int var = 0; var < 2; ++var) {
    const double h = 1e-6;
    std::vector<double> xp = x, xm = x;
    xp[var] += h;
    xm[var] -= h;
    const double fd = (e.evaluate(xp) - e.evaluate(xm)) / (2 * h);
    CHECK(e.evaluate_with_derivative(x, var).second == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("builtin jacobians match finite differences") {
  for (const auto& name : builtin_field_names()) {
    const auto f = builtin_fields(name);
    const int d = f.dimension();
    std::vector<double> x(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) x[j] = 0.3 + 0.17 * j;
    for (int i = 0; i < f.count(); ++i) {
      if (!f.has_jacobian(i)) continue;
      const Eigen::MatrixXd jac = f.jacobian(i, x);
      for (int b = 0; b < d; ++b) {
        std::vector<double> xp = x, xm = x;
        xp[b] += 1e-6;
        xm[b] -= 1e-6;
        const auto gp = eval(f, i, xp), gm = eval(f, i, xm);
        for (int a = 0; a < d; ++a) CHECK(jac(a, b) == doctest::Approx((gp[a] - gm[a]) / 2e-6).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("non-finite field values are rejected with the point") {
  const auto f = fields_from_expressions("bad", 1, {{"1/x1"}});
  CHECK_THROWS_AS(f.eval_fields(std::vector<double>{0.0}), EvaluationError);
}
