#include "subctrl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "subctrl/errors.hpp"
#include "subctrl/expression.hpp"

namespace subctrl {

GridDomain GridDomain::build(std::vector<double> lower, std::vector<double> upper,
                             std::vector<int> counts, const std::optional<std::string>& mask) {
  const std::size_t d = counts.size();
  if (d == 0 || lower.size() != d || upper.size() != d) {
    throw ConfigError("grid box corners and resolution must have the same positive length");
  }
  if (d > static_cast<std::size_t>(kMaxDimension)) {
    throw ConfigError("grid dimension " + std::to_string(d) + " exceeds the supported maximum of " +
                      std::to_string(kMaxDimension));
  }
  GridDomain g;
  g.lower_ = std::move(lower);
  g.upper_ = std::move(upper);
  g.counts_ = std::move(counts);
  g.spacing_.resize(d);
  g.strides_.assign(d, 1);
  for (std::size_t k = 0; k < d; ++k) {
    if (g.counts_[k] < 3) {
      throw ConfigError("resolution along axis " + std::to_string(k + 1) + " is " +
                        std::to_string(g.counts_[k]) + "; at least 3 nodes are required");
    }
    if (!std::isfinite(g.lower_[k]) || !std::isfinite(g.upper_[k]) || !(g.upper_[k] > g.lower_[k])) {
      throw ConfigError("degenerate box along axis " + std::to_string(k + 1));
    }
    g.spacing_[k] = (g.upper_[k] - g.lower_[k]) / (g.counts_[k] - 1);
  }
  for (std::size_t k = d - 1; k-- > 0;) g.strides_[k] = g.strides_[k + 1] * g.counts_[k + 1];
  const std::size_t total = g.strides_[0] * g.counts_[0];

  g.active_of_node_.assign(total, -1);
  std::optional<Expression> predicate;
  if (mask) {
    predicate = Expression::parse(*mask);
    if (predicate->max_variable() > static_cast<int>(d)) {
      throw ConfigError("mask expression references x" + std::to_string(predicate->max_variable()) +
                        " but the grid has dimension " + std::to_string(d));
    }
    g.mask_text_ = *mask;
  }
  for (std::size_t node = 0; node < total; ++node) {
    if (predicate && predicate->evaluate(g.node_point(node)) == 0.0) continue;
    g.active_of_node_[node] = static_cast<long>(g.node_of_active_.size());
    g.node_of_active_.push_back(node);
  }
  if (g.node_of_active_.empty()) throw ConfigError("grid mask leaves no active nodes");
  if (g.node_of_active_.size() < 2) throw ConfigError("grid needs at least two active nodes");

  // Flood fill under axis-neighbour adjacency.
  std::vector<char> seen(total, 0);
  std::vector<std::size_t> stack{g.node_of_active_.front()};
  seen[stack.front()] = 1;
  std::size_t reached = 0;
  while (!stack.empty()) {
    const std::size_t node = stack.back();
    stack.pop_back();
    ++reached;
    const auto idx = g.multi_index(node);
    for (std::size_t k = 0; k < d; ++k) {
      for (int step : {-1, 1}) {
        const int j = idx[k] + step;
        if (j < 0 || j >= g.counts_[k]) continue;
        const std::size_t nb = step > 0 ? node + g.strides_[k] : node - g.strides_[k];
        if (g.active_of_node_[nb] >= 0 && !seen[nb]) {
          seen[nb] = 1;
          stack.push_back(nb);
        }
      }
    }
  }
  if (reached != g.node_of_active_.size()) {
    throw ConfigError("grid mask yields a disconnected active set (" + std::to_string(reached) + " of " +
                      std::to_string(g.node_of_active_.size()) + " nodes reachable)");
  }

  g.weights_.resize(static_cast<long>(g.node_of_active_.size()));
  for (std::size_t a = 0; a < g.node_of_active_.size(); ++a) {
    const auto idx = g.multi_index(g.node_of_active_[a]);
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      const bool edge = idx[k] == 0 || idx[k] == g.counts_[k] - 1;
      w *= edge ? 0.5 * g.spacing_[k] : g.spacing_[k];
    }
    g.weights_[static_cast<long>(a)] = w;
  }
  return g;
}

std::vector<int> GridDomain::multi_index(std::size_t node) const {
  std::vector<int> idx(counts_.size());
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    idx[k] = static_cast<int>(node / strides_[k]);
    node %= strides_[k];
  }
  return idx;
}

std::vector<double> GridDomain::node_point(std::size_t node) const {
  std::vector<double> x(counts_.size());
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    const int i = static_cast<int>(node / strides_[k]);
    node %= strides_[k];
    // The last node hits the upper corner exactly.
    x[k] = i == counts_[k] - 1 ? upper_[k] : lower_[k] + i * spacing_[k];
  }
  return x;
}

Eigen::VectorXd GridDomain::coordinate(int axis) const {
  Eigen::VectorXd c(static_cast<long>(active_count()));
  for (std::size_t a = 0; a < active_count(); ++a) c[static_cast<long>(a)] = point(a)[axis];
  return c;
}

double GridDomain::box_volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < counts_.size(); ++k) v *= upper_[k] - lower_[k];
  return v;
}

bool GridDomain::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    const double slack = 1e-12 * (upper_[k] - lower_[k]);
    if (!(x[k] >= lower_[k] - slack && x[k] <= upper_[k] + slack)) return false;
  }
  return true;
}

void GridDomain::clamp(std::span<double> x) const {
  for (std::size_t k = 0; k < counts_.size(); ++k) x[k] = std::clamp(x[k], lower_[k], upper_[k]);
}

std::size_t GridDomain::nearest_active(std::span<const double> x) const {
  std::size_t node = 0;
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    const double s = (std::clamp(x[k], lower_[k], upper_[k]) - lower_[k]) / spacing_[k];
    const int i = std::clamp(static_cast<int>(std::lround(s)), 0, counts_[k] - 1);
    node += static_cast<std::size_t>(i) * strides_[k];
  }
  if (active_of_node_[node] >= 0) return static_cast<std::size_t>(active_of_node_[node]);
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < active_count(); ++a) {
    const auto p = point(a);
    double dist = 0.0;
    for (std::size_t k = 0; k < counts_.size(); ++k) dist += (p[k] - x[k]) * (p[k] - x[k]);
    if (dist < best_dist) {
      best_dist = dist;
      best = a;
    }
  }
  return best;
}

GridDomain::CellLocation GridDomain::locate(std::span<const double> x) const {
  const std::size_t d = counts_.size();
  if (!contains(x)) {
    std::ostringstream msg;
    msg << "point (";
    for (std::size_t k = 0; k < d; ++k) msg << (k ? ", " : "") << x[k];
    msg << ") lies outside the grid box";
    throw OutOfDomainError(msg.str());
  }
  std::array<double, kMaxDimension> frac{};
  std::size_t base = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const double s = (x[k] - lower_[k]) / spacing_[k];
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, counts_[k] - 2);
    frac[k] = std::clamp(s - i, 0.0, 1.0);
    base += static_cast<std::size_t>(i) * strides_[k];
  }
  CellLocation loc;
  loc.corners = 1 << d;
  bool any_masked = false;
  for (int c = 0; c < loc.corners; ++c) {
    std::size_t node = base;
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      if (c & (1 << k)) {
        node += strides_[k];
        w *= frac[k];
      } else {
        w *= 1.0 - frac[k];
      }
    }
    loc.corner[c] = active_of_node_[node];
    loc.weight[c] = w;
    any_masked = any_masked || loc.corner[c] < 0;
  }
  if (any_masked) {
    std::array<long, 1 << kMaxDimension> replaced = loc.corner;
    for (int c = 0; c < loc.corners; ++c) {
      if (loc.corner[c] >= 0) continue;
      double best = std::numeric_limits<double>::infinity();
      long pick = -1;
      for (int o = 0; o < loc.corners; ++o) {
        if (loc.corner[o] < 0) continue;
        // Distance from x to corner o, in physical units.
        double dist = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double off = ((o >> k) & 1) - frac[k];
          dist += off * off * spacing_[k] * spacing_[k];
        }
        if (dist < best) {
          best = dist;
          pick = loc.corner[o];
        }
      }
      replaced[c] = pick;
    }
    loc.corner = replaced;
    loc.valid = loc.corner[0] >= 0;
  }
  return loc;
}

double GridDomain::interpolate(std::span<const double> values, std::span<const double> x) const {
  const CellLocation loc = locate(x);
  if (!loc.valid) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (int c = 0; c < loc.corners; ++c) {
    if (loc.weight[c] != 0.0) sum += loc.weight[c] * values[static_cast<std::size_t>(loc.corner[c])];
  }
  return sum;
}

std::size_t GridDomain::cell_count() const {
  std::size_t n = 1;
  for (int c : counts_) n *= static_cast<std::size_t>(c - 1);
  return n;
}

std::vector<int> GridDomain::cell_multi_index(std::size_t cell) const {
  const std::size_t d = counts_.size();
  std::vector<int> idx(d);
  for (std::size_t k = d; k-- > 0;) {
    const auto n = static_cast<std::size_t>(counts_[k] - 1);
    idx[k] = static_cast<int>(cell % n);
    cell /= n;
  }
  return idx;
}

std::size_t GridDomain::cell_of_point(std::span<const double> x) const {
  std::size_t cell = 0;
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    const double s = (x[k] - lower_[k]) / spacing_[k];
    const int i = std::clamp(static_cast<int>(std::floor(s)), 0, counts_[k] - 2);
    cell = cell * static_cast<std::size_t>(counts_[k] - 1) + static_cast<std::size_t>(i);
  }
  return cell;
}

double GridDomain::cell_volume() const {
  double v = 1.0;
  for (double h : spacing_) v *= h;
  return v;
}

void GridDomain::write_csv(std::ostream& out) const {
  out << "index";
  for (std::size_t k = 0; k < counts_.size(); ++k) out << ",x" << (k + 1);
  out << ",weight,mask\n";
  out.precision(17);
  for (std::size_t node = 0; node < node_count(); ++node) {
    out << node;
    for (double c : node_point(node)) out << ',' << c;
    const long a = active_of_node_[node];
    out << ',' << (a >= 0 ? weights_[a] : 0.0) << ',' << (a >= 0 ? 1 : 0) << '\n';
  }
}

bool GridDomain::operator==(const GridDomain& other) const {
  return lower_ == other.lower_ && upper_ == other.upper_ && counts_ == other.counts_ &&
         active_of_node_ == other.active_of_node_;
}

Eigen::VectorXd quad_weights(const GridDomain& grid) { return grid.weights(); }

double interpolate(const GridDomain& grid, std::span<const double> values, std::span<const double> x) {
  return grid.interpolate(values, x);
}

DensityField::DensityField(const GridDomain& grid, Eigen::VectorXd values)
    : grid_(&grid), values_(std::move(values)) {
  if (values_.size() != static_cast<long>(grid.active_count())) {
    throw ConfigError("density has " + std::to_string(values_.size()) + " values but the grid has " +
                      std::to_string(grid.active_count()) + " active nodes");
  }
  for (long j = 0; j < values_.size(); ++j) {
    if (!std::isfinite(values_[j]) || values_[j] < 0.0) {
      throw ConfigError("density value at node " + std::to_string(j) + " is negative or non-finite");
    }
  }
  if (std::abs(mass() - 1.0) > 1e-10) {
    throw ConfigError("density integrates to " + std::to_string(mass()) + " instead of 1");
  }
}

DensityField DensityField::normalized(const GridDomain& grid, Eigen::VectorXd values) {
  if (values.size() != static_cast<long>(grid.active_count())) {
    throw ConfigError("density size does not match the grid");
  }
  const double mass = grid.weights().dot(values);
  if (!(mass > 0.0) || !std::isfinite(mass)) throw ConfigError("density has nonpositive mass");
  return DensityField(grid, values / mass);
}

DensityField DensityField::uniform(const GridDomain& grid) {
  return normalized(grid, Eigen::VectorXd::Ones(static_cast<long>(grid.active_count())));
}

double DensityField::mass() const { return grid_->weights().dot(values_); }

}  // namespace subctrl
