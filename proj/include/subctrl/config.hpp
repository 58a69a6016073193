#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "subctrl/fields.hpp"
#include "subctrl/grid.hpp"

namespace subctrl {

struct GridConfig {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> resolution;
  std::optional<std::string> mask;
  bool nonbox_heuristic = false;  // must be true whenever a mask is given
};

struct FieldsConfig {
  std::optional<std::string> builtin;
  int dimension = 0;
  std::vector<std::vector<std::string>> components;
  std::optional<std::string> weight;  // operator weight expression
};

struct SolverConfig {
  double poisson_tol = 1e-10;
  int max_iter = 20000;
  double eig_tol = 1e-8;
  double gap_floor = 1e-9;
  std::optional<double> kernel_tol;  // absolute; defaults to the gap floor
  int kernel_max = 16;
  int lanczos_max = 300;
  int max_restarts = 5;
  std::uint64_t seed = 20240611;
  int threads = 1;
};

struct ExperimentConfig {
  std::string rho0 = "1";
  std::string rho1 = "1";
  int steps = 64;
  std::optional<double> c;
  std::vector<double> y;
  double radius = 0.2;
  std::optional<double> alpha;
  std::optional<double> floor_mix;
  int substeps = 8;
  double reach_threshold = 0.99;
  double residual_threshold = 1e-6;
  std::vector<double> path_times;
  std::vector<std::string> path;
  bool transport = false;  // steer: also push an ensemble through the controls
  bool reverse = false;    // reach: also run the time-reversed experiment
  long particles = 10000;
  std::uint64_t seed = 1;
  long invariance_samples = 2000;
  std::optional<double> tau;
};

struct OutputConfig {
  std::string dir = "out";
  bool plots = false;
  bool dump_grid = false;
  bool dump_operator = false;
  bool dump_eigenvector = false;
  bool dump_controls = false;
  bool dump_trajectories = false;
};

/// Fully resolved run configuration: every default is filled in so that the
/// echo in a report reproduces the run.
struct RunConfig {
  GridConfig grid;
  FieldsConfig fields;
  SolverConfig solver;
  ExperimentConfig experiment;
  OutputConfig output;
};

/// Parses and validates a run config document with sections [grid], [fields],
/// [solver], [experiment] and [output]. Unknown sections or keys, missing
/// required keys and out-of-range values throw ConfigError.
RunConfig parse_run_config(std::string_view text);
RunConfig load_run_config(const std::string& path);

/// The resolved configuration as JSON, in a fixed key order.
nlohmann::ordered_json config_to_json(const RunConfig& config);

GridDomain build_grid(const GridConfig& config);
VectorFieldSet build_fields(const FieldsConfig& config);

/// Evaluates an expression in x1..xd at every active node.
Eigen::VectorXd nodal_expression(const GridDomain& grid, const std::string& text);

}  // namespace subctrl
