#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <optional>
#include <ostream>
#include <vector>

#include "subctrl/fields.hpp"
#include "subctrl/grid.hpp"

namespace subctrl {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Finite-difference approximation D ~ X_i of the derivative along one field.
///
/// Each row is stored as a list of per-axis stencil terms of the form
/// coef * (a * (v[n1] - v[r]) + b * (v[n2] - v[r])); applying the operator in
/// this difference form makes D * constant exactly zero. The same terms give
/// the assembled sparse matrix.
class DirectionalDerivative {
 public:
  struct Term {
    long row;
    long n1;
    long n2;
    double coef;
    double a;
    double b;
  };

  DirectionalDerivative(long size, std::vector<Term> terms);

  const SparseMatrix& matrix() const { return matrix_; }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const { return matrix_.transpose() * v; }

 private:
  long size_;
  std::vector<Term> terms_;  // sorted by row
  SparseMatrix matrix_;
};

/// Row r of D_i computes sum_j g_i^j(x_r) * (difference along axis j): central
/// where both neighbours are active, second-order one-sided otherwise,
/// first-order one-sided as a last resort.
DirectionalDerivative assemble_directional(const GridDomain& grid, const VectorFieldSet& fields, int i);

/// Discrete sub-Laplacian L = sum_i D_i^T diag(a w) D_i (PSD, represents -Delta_H)
/// with mass matrix M = diag(a w); a = 1 unless a weight is supplied.
struct DiscreteOperator {
  SparseMatrix stiffness;
  Eigen::VectorXd mass;
  std::vector<DirectionalDerivative> directional;
  std::optional<Eigen::VectorXd> weight;
  /// Fill-reducing elimination order (active indices, eliminated first to
  /// last) from geometric nested dissection of the grid. Empty means "let the
  /// factorization choose".
  std::vector<int> elimination_order;

  long size() const { return mass.size(); }
  /// Matrix-free L v = sum_i D_i^T (M (D_i v)).
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  /// Largest Gershgorin row bound of M^{-1} L, an upper bound on the
  /// generalized spectrum of (L, M).
  double gershgorin_bound() const;
  /// Coordinate-format dump: header "N nnz" then "row col value" lines.
  void write_coo(std::ostream& out) const;
};

/// Nested dissection of the active nodes: recursively split the longest axis
/// by a two-node-thick separator slab (stencils reach two nodes along an
/// axis), ordering both halves before the separator.
std::vector<int> nested_dissection_order(const GridDomain& grid);

/// Throws ConfigError on a nonpositive or wrongly sized weight.
DiscreteOperator assemble_form_operator(const GridDomain& grid, const VectorFieldSet& fields,
                                        const std::optional<Eigen::VectorXd>& weight = {});

/// Throws ConfigError on a length mismatch.
Eigen::VectorXd apply_operator(const DiscreteOperator& op, const Eigen::VectorXd& v);

}  // namespace subctrl
