#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "subctrl/control.hpp"
#include "subctrl/fields.hpp"
#include "subctrl/grid.hpp"
#include "subctrl/operators.hpp"
#include "subctrl/spectral.hpp"

namespace subctrl {

/// P particles in R^d. Positions are stored row-major (particle p occupies
/// positions[p*d .. p*d+d)). Trajectories, when stored, hold K+1 snapshots
/// per particle in the same layout: trajectory[(p*(K+1) + k)*d + j].
struct ParticleEnsemble {
  int dimension = 0;
  std::vector<double> positions;
  std::uint64_t seed = 0;
  long exits = 0;
  std::vector<double> trajectories;
  std::size_t snapshots = 0;  // K+1 when trajectories are stored

  std::size_t count() const { return dimension ? positions.size() / static_cast<std::size_t>(dimension) : 0; }
  std::span<const double> position(std::size_t p) const {
    return {positions.data() + p * static_cast<std::size_t>(dimension), static_cast<std::size_t>(dimension)};
  }
  std::span<const double> snapshot(std::size_t p, std::size_t k) const {
    return {trajectories.data() + (p * snapshots + k) * static_cast<std::size_t>(dimension),
            static_cast<std::size_t>(dimension)};
  }

  /// CSV `particle,step,x1..xd`; requires stored trajectories.
  void write_trajectories(std::ostream& out) const;
};

/// Ensemble with one particle at every active node.
ParticleEnsemble node_ensemble(const GridDomain& grid);

/// One particle per active node, placed at the centroid of the node's dual
/// cell clipped to the box: interior nodes stay put, boundary nodes move a
/// quarter spacing inward along each boundary axis.
ParticleEnsemble dual_cell_ensemble(const GridDomain& grid);

/// P i.i.d. samples from the cell-wise constant density whose cell mass is the
/// mean of the corner values times the cell volume; uniform inside the cell.
/// Deterministic given the seed. Throws ConfigError when P = 0.
ParticleEnsemble sample_density(const DensityField& rho, std::size_t count, std::uint64_t seed);

struct IntegrateOptions {
  int substeps = 8;  // RK4 steps per control step
  bool store_trajectories = false;
  int threads = 1;
};

/// Classical RK4 on v(t, x) = sum_i u_i(t, x) g_i(x), with u_i multilinear in x
/// and linear in t between control steps. A particle that leaves the closed box
/// (or lands in a cell with no active node) is projected back and counted as an
/// exit, at most once per particle and control step. Throws EvaluationError on a
/// non-finite velocity.
ParticleEnsemble integrate_ensemble(const ParticleEnsemble& start, const ControlField& controls,
                                    const VectorFieldSet& fields, const IntegrateOptions& options = {});

/// L1 distance in [0, 2] between the normalized cell histogram of the ensemble
/// and the normalized cell masses of rho.
double density_distance(const ParticleEnsemble& ensemble, const DensityField& rho);

struct ReachOptions {
  std::vector<double> target;  // y
  double radius = 0.2;         // R
  std::optional<double> alpha;  // kernel width; (R/3)^2 when unset
  int steps = 64;
  int substeps = 8;
  std::optional<double> floor;      // density floor c; 1e-3/vol when unset
  std::optional<double> floor_mix;  // weight of the uniform part in rho_1; 2 c vol when unset
  PoissonOptions poisson;
  int threads = 1;
};

struct ReachabilityReport {
  std::vector<double> target;
  double radius = 0.0;
  double alpha = 0.0;
  double floor_mix = 0.0;
  std::vector<std::uint8_t> reached;   // trajectory entered the ball at some control step
  std::vector<std::uint8_t> terminal;  // terminal position inside the ball
  double fraction = 0.0;
  double fraction_terminal = 0.0;
  std::size_t seeds = 0;
  long exits = 0;
  double lambda = 0.0;
  ParticleEnsemble ensemble;  // terminal seeds with stored trajectories
};

/// Gaussian target rho_1 = (1 - beta) normalized exp(-|p - y|^2 / alpha) +
/// beta uniform on the grid nodes.
DensityField reach_target(const GridDomain& grid, std::span<const double> y, double alpha, double beta);

/// Steers uniform -> reach_target with the potential-based controls, seeds one
/// particle per active node (dual_cell_ensemble) and records which
/// trajectories hit B_R(y) at some control step. Throws OutOfDomainError
/// when y lies outside the box, ConfigError on R <= 0 and
/// NotControllableError when the gap is not certified.
ReachabilityReport reach_experiment(const VectorFieldSet& fields, const GridDomain& grid, const DiscreteOperator& op,
                                    const ReachOptions& options);

struct ReverseReachReport {
  double coverage = 0.0;  // fraction of active cells visited by the reversed ensemble
  std::size_t particles = 0;
  long exits = 0;
};

/// Time-reversed run: densities swapped (so the controls are u'(t) = -u(1-t)),
/// particles sampled from rho_1 restricted to B_R(y); reports the fraction of
/// grid cells the ensemble visits at some control step, an estimate of the
/// measure of the backward reachable set of the ball.
ReverseReachReport reverse_reach(const VectorFieldSet& fields, const GridDomain& grid, const DiscreteOperator& op,
                                 const ReachOptions& options, std::size_t particles, std::uint64_t seed);

struct InvarianceOptions {
  std::optional<double> tau;  // 0.05 min box extent / max nodal field norm when unset
  std::size_t samples = 2000;
  int flow_steps = 16;
  std::uint64_t seed = 7;
};

/// max |xi(e^{+-tau g_i}(x)) - xi(x)| over random sample points and fields,
/// with xi read at the nearest active node.
double invariance_defect(const VectorFieldSet& fields, const GridDomain& grid, std::span<const std::uint8_t> xi,
                         const InvarianceOptions& options = {});

struct InvariantSet {
  std::vector<std::uint8_t> indicator;  // over active nodes; node 0 is never in the set
  double defect = 0.0;
  double mass = 0.0;  // quadrature measure of the set
};

/// Thresholds each near-kernel vector at its M-weighted median and returns
/// the distinct nontrivial partitions with their invariance defects. Empty iff
/// kernel_basis is empty.
std::vector<InvariantSet> detect_invariant_sets(const DiscreteOperator& op, const GridDomain& grid,
                                                const VectorFieldSet& fields, double tol,
                                                const SpectralOptions& spectral = {},
                                                const InvarianceOptions& invariance = {});

struct SliceFlow {
  std::vector<long> initial;   // particles per slice at the start
  std::vector<long> terminal;  // particles per slice at the end
  long crossings = 0;          // particles whose slice changed
  long max_excess = 0;         // max over slices of terminal - initial
};

/// Slices are the cell layers along `axis`.
SliceFlow slice_mass_flow(const GridDomain& grid, int axis, const ParticleEnsemble& initial,
                          const ParticleEnsemble& terminal);

}  // namespace subctrl
