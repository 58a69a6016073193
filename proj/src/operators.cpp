#include "subctrl/operators.hpp"

#include <algorithm>
#include <cmath>

#include "subctrl/errors.hpp"

namespace subctrl {

DirectionalDerivative::DirectionalDerivative(long size, std::vector<Term> terms)
    : size_(size), terms_(std::move(terms)), matrix_(size, size) {
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const Term& x, const Term& y) { return x.row < y.row; });
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(terms_.size() * 3);
  for (const Term& t : terms_) {
    triplets.emplace_back(t.row, t.n1, t.coef * t.a);
    if (t.b != 0.0) triplets.emplace_back(t.row, t.n2, t.coef * t.b);
    triplets.emplace_back(t.row, t.row, -t.coef * (t.a + t.b));
  }
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.prune(0.0);
  matrix_.makeCompressed();
}

Eigen::VectorXd DirectionalDerivative::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size_);
  for (const Term& t : terms_) {
    const double center = v[t.row];
    double diff = t.a * (v[t.n1] - center);
    if (t.b != 0.0) diff += t.b * (v[t.n2] - center);
    out[t.row] += t.coef * diff;
  }
  return out;
}

DirectionalDerivative assemble_directional(const GridDomain& grid, const VectorFieldSet& fields, int i) {
  const int d = grid.dimension();
  if (fields.dimension() != d) {
    throw ConfigError("field dimension " + std::to_string(fields.dimension()) +
                      " does not match grid dimension " + std::to_string(d));
  }
  if (i < 0 || i >= fields.count()) throw ConfigError("field index out of range");
  const long n = static_cast<long>(grid.active_count());
  std::vector<DirectionalDerivative::Term> terms;
  std::vector<double> g(static_cast<std::size_t>(d));
  for (long r = 0; r < n; ++r) {
    const std::size_t node = grid.node_of(static_cast<std::size_t>(r));
    const auto x = grid.node_point(node);
    fields.evaluate(i, x, g);
    const auto idx = grid.multi_index(node);
    for (int j = 0; j < d; ++j) {
      if (!std::isfinite(g[j])) {
        throw EvaluationError("field g" + std::to_string(i + 1) + " is non-finite at node " +
                              std::to_string(r));
      }
      if (g[j] == 0.0) continue;
      const std::size_t s = grid.stride(j);
      auto neighbour = [&](int offset) -> long {
        const int k = idx[j] + offset;
        if (k < 0 || k >= grid.counts()[j]) return -1;
        return grid.active_index(offset > 0 ? node + s * offset : node - s * (-offset));
      };
      const long p1 = neighbour(1), m1 = neighbour(-1);
      const double h = grid.spacing()[j];
      if (p1 >= 0 && m1 >= 0) {
        terms.push_back({r, p1, m1, g[j] / (2 * h), 1.0, -1.0});
      } else if (const long p2 = neighbour(2); p1 >= 0 && p2 >= 0) {
        terms.push_back({r, p1, p2, g[j] / (2 * h), 4.0, -1.0});
      } else if (const long m2 = neighbour(-2); m1 >= 0 && m2 >= 0) {
        terms.push_back({r, m1, m2, g[j] / (2 * h), -4.0, 1.0});
      } else if (p1 >= 0) {
        terms.push_back({r, p1, p1, g[j] / h, 1.0, 0.0});
      } else if (m1 >= 0) {
        terms.push_back({r, m1, m1, g[j] / h, -1.0, 0.0});
      }
    }
  }
  return DirectionalDerivative(n, std::move(terms));
}

DiscreteOperator assemble_form_operator(const GridDomain& grid, const VectorFieldSet& fields,
                                        const std::optional<Eigen::VectorXd>& weight) {
  const long n = static_cast<long>(grid.active_count());
  DiscreteOperator op;
  op.mass = grid.weights();
  if (weight) {
    if (weight->size() != n) throw ConfigError("weight vector does not match the grid");
    for (long j = 0; j < n; ++j) {
      if (!((*weight)[j] > 0.0) || !std::isfinite((*weight)[j])) {
        throw ConfigError("operator weight must be positive at every active node (node " +
                          std::to_string(j) + ")");
      }
    }
    op.mass = op.mass.cwiseProduct(*weight);
    op.weight = *weight;
  }
  for (int i = 0; i < fields.count(); ++i) op.directional.push_back(assemble_directional(grid, fields, i));

  // Accumulate w_r * D_ra * D_rb row by row so that (a,b) and (b,a) receive
  // bitwise identical contributions in the same order: L is exactly symmetric.
  std::vector<std::vector<std::pair<long, double>>> rows(static_cast<std::size_t>(n));
  auto add = [&rows](long a, long b, double value) {
    auto& row = rows[static_cast<std::size_t>(a)];
    for (auto& [col, v] : row) {
      if (col == b) {
        v += value;
        return;
      }
    }
    row.emplace_back(b, value);
  };
  for (const auto& dir : op.directional) {
    const SparseMatrix& D = dir.matrix();
    for (long r = 0; r < n; ++r) {
      const double w = op.mass[r];
      for (SparseMatrix::InnerIterator ia(D, r); ia; ++ia) {
        for (SparseMatrix::InnerIterator ib(D, r); ib; ++ib) {
          add(ia.col(), ib.col(), w * (ia.value() * ib.value()));
        }
      }
    }
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (long a = 0; a < n; ++a) {
    auto& row = rows[static_cast<std::size_t>(a)];
    std::sort(row.begin(), row.end());
    for (const auto& [col, v] : row) triplets.emplace_back(a, col, v);
  }
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(triplets.begin(), triplets.end());
  op.stiffness.makeCompressed();
  op.elimination_order = nested_dissection_order(grid);
  return op;
}

namespace {

void dissect(const GridDomain& grid, std::vector<int> lo, std::vector<int> hi, std::vector<int>& out) {
  const int d = grid.dimension();
  long cells = 1;
  int axis = 0;
  int widest = 0;
  for (int k = 0; k < d; ++k) {
    cells *= hi[k] - lo[k];
    if (hi[k] - lo[k] > widest) widest = hi[k] - lo[k], axis = k;
  }
  if (cells <= 64 || widest < 5) {
    std::vector<int> idx(lo);
    for (long c = 0; c < cells; ++c) {
      std::size_t node = 0;
      for (int k = 0; k < d; ++k) node += static_cast<std::size_t>(idx[k]) * grid.stride(k);
      if (const long a = grid.active_index(node); a >= 0) out.push_back(static_cast<int>(a));
      for (int k = d - 1; k >= 0; --k) {
        if (++idx[k] < hi[k]) break;
        idx[k] = lo[k];
      }
    }
    return;
  }
  const int mid = (lo[axis] + hi[axis]) / 2 - 1;
  auto left_hi = hi;
  left_hi[axis] = mid;
  dissect(grid, lo, left_hi, out);
  auto right_lo = lo;
  right_lo[axis] = mid + 2;
  dissect(grid, right_lo, hi, out);
  auto sep_lo = lo, sep_hi = hi;
  sep_lo[axis] = mid;
  sep_hi[axis] = mid + 2;
  dissect(grid, sep_lo, sep_hi, out);
}

}  // namespace

std::vector<int> nested_dissection_order(const GridDomain& grid) {
  std::vector<int> order;
  order.reserve(grid.active_count());
  dissect(grid, std::vector<int>(grid.dimension(), 0), grid.counts(), order);
  return order;
}

Eigen::VectorXd DiscreteOperator::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(size());
  for (const auto& dir : directional) {
    const Eigen::VectorXd flux = mass.cwiseProduct(dir.apply(v));
    out += dir.apply_transpose(flux);
  }
  return out;
}

double DiscreteOperator::gershgorin_bound() const {
  double bound = 0.0;
  for (long r = 0; r < stiffness.outerSize(); ++r) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(stiffness, r); it; ++it) sum += std::abs(it.value());
    bound = std::max(bound, sum / mass[r]);
  }
  return bound;
}

void DiscreteOperator::write_coo(std::ostream& out) const {
  out << size() << ' ' << stiffness.nonZeros() << '\n';
  out.precision(17);
  for (long r = 0; r < stiffness.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(stiffness, r); it; ++it) {
      out << r << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

Eigen::VectorXd apply_operator(const DiscreteOperator& op, const Eigen::VectorXd& v) {
  if (v.size() != op.size()) {
    throw ConfigError("vector length " + std::to_string(v.size()) + " does not match operator size " +
                      std::to_string(op.size()));
  }
  return op.apply(v);
}

}  // namespace subctrl
