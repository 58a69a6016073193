#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace subctrl {

/// Uniform tensor grid over an axis-aligned box with an optional interior
/// mask. Active nodes are enumerated lexicographically in their multi-index
/// (axis 1 most significant), which fixes the ordering of every nodal vector
/// and matrix in the library.
class GridDomain {
 public:
  static constexpr int kMaxDimension = 6;

  /// Corner data of the cell containing a point: 2^d active indices (masked
  /// corners already replaced by the nearest active corner) and multilinear
  /// weights. `valid` is false when every corner of the cell is masked out.
  struct CellLocation {
    std::array<long, 1 << kMaxDimension> corner{};
    std::array<double, 1 << kMaxDimension> weight{};
    int corners = 0;
    bool valid = true;
  };

  /// `mask` is a predicate expression in x1..xd; nodes where it is nonzero are
  /// active. Throws ConfigError for counts < 3, degenerate boxes, an empty or
  /// singleton active set, or a disconnected active set.
  static GridDomain build(std::vector<double> lower, std::vector<double> upper,
                          std::vector<int> counts, const std::optional<std::string>& mask = {});

  int dimension() const { return static_cast<int>(counts_.size()); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<int>& counts() const { return counts_; }
  const std::vector<double>& spacing() const { return spacing_; }
  const std::optional<std::string>& mask_expression() const { return mask_text_; }
  bool masked() const { return mask_text_.has_value(); }

  std::size_t node_count() const { return active_of_node_.size(); }
  std::size_t active_count() const { return node_of_active_.size(); }
  std::size_t stride(int axis) const { return strides_[axis]; }

  /// Active index of a flat node index, or -1 when the node is masked out.
  long active_index(std::size_t node) const { return active_of_node_[node]; }
  std::size_t node_of(std::size_t active) const { return node_of_active_[active]; }
  std::vector<int> multi_index(std::size_t node) const;

  std::vector<double> node_point(std::size_t node) const;
  std::vector<double> point(std::size_t active) const { return node_point(node_of(active)); }
  /// Nodal vector of the coordinate along `axis` (0-based).
  Eigen::VectorXd coordinate(int axis) const;

  double box_volume() const;
  /// Trapezoid weights restricted to active nodes.
  const Eigen::VectorXd& weights() const { return weights_; }

  bool contains(std::span<const double> x) const;
  /// Clamps x into the closed box.
  void clamp(std::span<double> x) const;
  /// Active index of the node nearest to x (x clamped into the box first).
  std::size_t nearest_active(std::span<const double> x) const;

  /// Throws OutOfDomainError when x lies outside the box.
  CellLocation locate(std::span<const double> x) const;
  /// Multilinear interpolation of an active-node vector at x; NaN if the
  /// containing cell has no active corner.
  double interpolate(std::span<const double> values, std::span<const double> x) const;

  /// Cells are indexed by their lowest corner, (n_1-1) x ... x (n_d-1) of them.
  std::size_t cell_count() const;
  std::vector<int> cell_multi_index(std::size_t cell) const;
  std::size_t cell_of_point(std::span<const double> x) const;
  double cell_volume() const;

  /// CSV with columns index,x1..xd,weight,mask over all nodes.
  void write_csv(std::ostream& out) const;

  bool operator==(const GridDomain& other) const;

 private:
  GridDomain() = default;

  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<int> counts_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::optional<std::string> mask_text_;
  std::vector<long> active_of_node_;
  std::vector<std::size_t> node_of_active_;
  Eigen::VectorXd weights_;
};

/// Trapezoid-rule tensor weights restricted to the active nodes.
Eigen::VectorXd quad_weights(const GridDomain& grid);

double interpolate(const GridDomain& grid, std::span<const double> values, std::span<const double> x);

/// Nonnegative nodal density integrating to one under the grid quadrature.
class DensityField {
 public:
  /// Validates nonnegativity, finiteness and unit mass (within 1e-10).
  DensityField(const GridDomain& grid, Eigen::VectorXd values);

  /// Scales nonnegative `values` to unit mass.
  static DensityField normalized(const GridDomain& grid, Eigen::VectorXd values);
  static DensityField uniform(const GridDomain& grid);

  const GridDomain& grid() const { return *grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double mass() const;
  double min() const { return values_.minCoeff(); }

 private:
  const GridDomain* grid_;
  Eigen::VectorXd values_;
};

}  // namespace subctrl
