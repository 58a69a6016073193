#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace subctrl {

/// The control vector fields g_1..g_m of a driftless control-affine system
/// x' = sum_i u_i g_i(x) on R^d. Immutable after construction.
class VectorFieldSet {
 public:
  /// Writes g_i(x) (length d) into `out`.
  using Evaluator = std::function<void(std::span<const double> x, std::span<double> out)>;
  /// Writes the row-major d x d Jacobian, jac[a*d + b] = d g^a / d x_b.
  using JacobianEvaluator = std::function<void(std::span<const double> x, std::span<double> jac)>;

  struct Field {
    Evaluator value;
    JacobianEvaluator jacobian;           // may be empty
    std::vector<std::string> components;  // textual form, one expression per axis
  };

  VectorFieldSet(std::string name, int dimension, std::vector<Field> fields);

  const std::string& name() const { return name_; }
  int dimension() const { return dimension_; }
  int count() const { return static_cast<int>(fields_.size()); }

  /// Unchecked hot-path evaluation of g_i(x).
  void evaluate(int i, std::span<const double> x, std::span<double> out) const {
    fields_[i].value(x, out);
  }

  /// d x m table whose column i is g_i(x). Throws EvaluationError carrying x
  /// and i on a non-finite component.
  Eigen::MatrixXd eval_fields(std::span<const double> x) const;

  bool has_jacobian(int i) const { return static_cast<bool>(fields_[i].jacobian); }
  Eigen::MatrixXd jacobian(int i, std::span<const double> x) const;

  const std::vector<std::string>& components(int i) const { return fields_[i].components; }

 private:
  std::string name_;
  int dimension_;
  std::vector<Field> fields_;
};

/// Canonical test systems: axis2d, axis3d-degenerate, heisenberg, grushin, unicycle.
VectorFieldSet builtin_fields(std::string_view name);
const std::vector<std::string>& builtin_field_names();

/// Fields from per-axis component expressions in x1..xd. Jacobians come from
/// forward-mode differentiation of the expressions.
VectorFieldSet fields_from_expressions(std::string name, int dimension,
                                       const std::vector<std::vector<std::string>>& components);

/// Parses a field configuration document:
///
///     dimension = 2
///     fields = [["1", "0"], ["0", "x1"]]
///
/// An optional `count` key must match the number of fields.
VectorFieldSet parse_field_config(std::string_view text);

/// Inverse of parse_field_config for any set carrying textual components.
std::string serialize_fields(const VectorFieldSet& fields);

}  // namespace subctrl
