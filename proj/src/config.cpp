#include "subctrl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "subctrl/document.hpp"
#include "subctrl/errors.hpp"
#include "subctrl/expression.hpp"

namespace subctrl {

namespace {

const std::set<std::string> kSections = {"grid", "fields", "solver", "experiment", "output"};

// Reads typed keys from one section and remembers which ones were used so
// that leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const Document& doc, const std::string& name) : name_(name), section_(doc.section(name)) {}

  const DocValue* get(const std::string& key) {
    used_.insert(key);
    return section_ ? section_->find(key) : nullptr;
  }
  std::string where(const std::string& key) const { return name_ + "." + key; }

  void number(const std::string& key, double& out) {
    if (const DocValue* v = get(key)) out = doc_number(*v, where(key));
  }
  void number(const std::string& key, std::optional<double>& out) {
    if (const DocValue* v = get(key)) out = doc_number(*v, where(key));
  }
  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (const DocValue* v = get(key)) out = static_cast<Int>(doc_integer(*v, where(key)));
  }
  void seed(const std::string& key, std::uint64_t& out) {
    if (const DocValue* v = get(key)) {
      const long s = doc_integer(*v, where(key));
      if (s < 0) throw ConfigError("'" + where(key) + "' must be nonnegative");
      out = static_cast<std::uint64_t>(s);
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (const DocValue* v = get(key)) out = doc_bool(*v, where(key));
  }
  void string(const std::string& key, std::string& out) {
    if (const DocValue* v = get(key)) out = doc_string(*v, where(key));
  }
  void string(const std::string& key, std::optional<std::string>& out) {
    if (const DocValue* v = get(key)) out = doc_string(*v, where(key));
  }

  void finish() const {
    if (!section_) return;
    for (const auto& [key, value] : section_->entries) {
      if (!used_.count(key)) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

 private:
  std::string name_;
  const DocSection* section_;
  std::set<std::string> used_;
};

void require_positive(double value, const std::string& what) {
  if (!(value > 0.0)) throw ConfigError("'" + what + "' must be positive");
}

void require_at_least(long value, long low, const std::string& what) {
  if (value < low) throw ConfigError("'" + what + "' must be at least " + std::to_string(low));
}

}  // namespace

RunConfig parse_run_config(std::string_view text) {
  const Document doc = Document::parse(text);
  for (const auto& section : doc.sections()) {
    if (section.name.empty()) {
      if (!section.entries.empty()) throw ConfigError("config keys must live inside a [section]");
      continue;
    }
    if (!kSections.count(section.name)) throw ConfigError("unknown section [" + section.name + "]");
  }
  RunConfig config;

  {
    SectionReader r(doc, "grid");
    GridConfig& g = config.grid;
    const DocValue* box = r.get("box");
    if (!box) throw ConfigError("missing required key 'grid.box'");
    const auto& corners = doc_array(*box, "grid.box");
    if (corners.size() != 2) throw ConfigError("'grid.box' must be [[lower...], [upper...]]");
    g.lower = doc_number_list(corners[0], "grid.box");
    g.upper = doc_number_list(corners[1], "grid.box");
    const DocValue* res = r.get("resolution");
    if (!res) throw ConfigError("missing required key 'grid.resolution'");
    for (const auto& item : doc_array(*res, "grid.resolution")) {
      g.resolution.push_back(static_cast<int>(doc_integer(item, "grid.resolution")));
    }
    if (g.lower.size() != g.upper.size() || g.lower.size() != g.resolution.size() || g.lower.empty()) {
      throw ConfigError("'grid.box' corners and 'grid.resolution' must have the same nonzero length");
    }
    r.string("mask", g.mask);
    r.boolean("nonbox_heuristic", g.nonbox_heuristic);
    if (g.mask && !g.nonbox_heuristic) {
      throw ConfigError(
          "masked domains are heuristic: set 'grid.nonbox_heuristic = true' to acknowledge that non-box "
          "domains are not verified");
    }
    r.finish();
  }

  {
    SectionReader r(doc, "fields");
    FieldsConfig& f = config.fields;
    r.string("builtin", f.builtin);
    const DocValue* dim = r.get("dimension");
    const DocValue* list = r.get("fields");
    if (f.builtin && (dim || list)) {
      throw ConfigError("[fields] takes either 'builtin' or 'dimension' + 'fields', not both");
    }
    if (!f.builtin) {
      if (!dim || !list) throw ConfigError("[fields] needs 'builtin' or both 'dimension' and 'fields'");
      f.dimension = static_cast<int>(doc_integer(*dim, "fields.dimension"));
      require_at_least(f.dimension, 1, "fields.dimension");
      for (const auto& item : doc_array(*list, "fields.fields")) {
        f.components.push_back(doc_string_list(item, "fields.fields"));
      }
      if (f.components.empty()) throw ConfigError("'fields.fields' declares no fields (m = 0)");
    } else {
      f.dimension = builtin_fields(*f.builtin).dimension();
    }
    r.string("weight", f.weight);
    r.finish();
    if (f.dimension != static_cast<int>(config.grid.resolution.size())) {
      throw ConfigError("field dimension " + std::to_string(f.dimension) + " does not match grid dimension " +
                        std::to_string(config.grid.resolution.size()));
    }
  }

  {
    SectionReader r(doc, "solver");
    SolverConfig& s = config.solver;
    r.number("poisson_tol", s.poisson_tol);
    r.integer("max_iter", s.max_iter);
    r.number("eig_tol", s.eig_tol);
    r.number("gap_floor", s.gap_floor);
    r.number("kernel_tol", s.kernel_tol);
    r.integer("kernel_max", s.kernel_max);
    r.integer("lanczos_max", s.lanczos_max);
    r.integer("max_restarts", s.max_restarts);
    r.seed("seed", s.seed);
    r.integer("threads", s.threads);
    r.finish();
    require_positive(s.poisson_tol, "solver.poisson_tol");
    require_positive(s.eig_tol, "solver.eig_tol");
    require_positive(s.gap_floor, "solver.gap_floor");
    if (s.kernel_tol) require_positive(*s.kernel_tol, "solver.kernel_tol");
    require_at_least(s.max_iter, 1, "solver.max_iter");
    require_at_least(s.kernel_max, 0, "solver.kernel_max");
    require_at_least(s.lanczos_max, 2, "solver.lanczos_max");
    require_at_least(s.max_restarts, 0, "solver.max_restarts");
    require_at_least(s.threads, 1, "solver.threads");
  }

  {
    SectionReader r(doc, "experiment");
    ExperimentConfig& e = config.experiment;
    r.string("rho0", e.rho0);
    r.string("rho1", e.rho1);
    r.integer("steps", e.steps);
    r.number("c", e.c);
    if (const DocValue* y = r.get("y")) e.y = doc_number_list(*y, "experiment.y");
    r.number("R", e.radius);
    r.number("alpha", e.alpha);
    r.number("floor_mix", e.floor_mix);
    r.integer("substeps", e.substeps);
    r.number("reach_threshold", e.reach_threshold);
    r.number("residual_threshold", e.residual_threshold);
    if (const DocValue* t = r.get("path_times")) e.path_times = doc_number_list(*t, "experiment.path_times");
    if (const DocValue* p = r.get("path")) e.path = doc_string_list(*p, "experiment.path");
    r.boolean("transport", e.transport);
    r.boolean("reverse", e.reverse);
    r.integer("particles", e.particles);
    r.seed("seed", e.seed);
    r.integer("invariance_samples", e.invariance_samples);
    r.number("tau", e.tau);
    r.finish();
    require_at_least(e.steps, 1, "experiment.steps");
    require_at_least(e.substeps, 1, "experiment.substeps");
    require_at_least(e.particles, 1, "experiment.particles");
    require_at_least(e.invariance_samples, 1, "experiment.invariance_samples");
    if (e.c) require_positive(*e.c, "experiment.c");
    if (e.alpha) require_positive(*e.alpha, "experiment.alpha");
    if (e.tau) require_positive(*e.tau, "experiment.tau");
    require_positive(e.residual_threshold, "experiment.residual_threshold");
    if (!(e.reach_threshold >= 0.0 && e.reach_threshold <= 1.0)) {
      throw ConfigError("'experiment.reach_threshold' must lie in [0, 1]");
    }
    if (e.floor_mix && !(*e.floor_mix >= 0.0 && *e.floor_mix < 1.0)) {
      throw ConfigError("'experiment.floor_mix' must lie in [0, 1)");
    }
    if (e.path.size() != e.path_times.size()) {
      throw ConfigError("'experiment.path' and 'experiment.path_times' must have the same length");
    }
    if (e.y.empty()) {
      for (std::size_t k = 0; k < config.grid.lower.size(); ++k) {
        e.y.push_back(0.5 * (config.grid.lower[k] + config.grid.upper[k]));
      }
    }
    if (e.y.size() != config.grid.lower.size()) {
      throw ConfigError("'experiment.y' must have one coordinate per grid axis");
    }
  }

  {
    SectionReader r(doc, "output");
    OutputConfig& o = config.output;
    r.string("dir", o.dir);
    r.boolean("plots", o.plots);
    r.boolean("dump_grid", o.dump_grid);
    r.boolean("dump_operator", o.dump_operator);
    r.boolean("dump_eigenvector", o.dump_eigenvector);
    r.boolean("dump_controls", o.dump_controls);
    r.boolean("dump_trajectories", o.dump_trajectories);
    r.finish();
    if (o.dir.empty()) throw ConfigError("'output.dir' must not be empty");
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  using nlohmann::ordered_json;
  auto optional_number = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  auto optional_string = [](const std::optional<std::string>& v) {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json j;
  j["grid"] = {{"lower", c.grid.lower},
               {"upper", c.grid.upper},
               {"resolution", c.grid.resolution},
               {"mask", optional_string(c.grid.mask)},
               {"nonbox_heuristic", c.grid.nonbox_heuristic}};
  j["fields"] = {{"builtin", optional_string(c.fields.builtin)},
                 {"dimension", c.fields.dimension},
                 {"fields", c.fields.components},
                 {"weight", optional_string(c.fields.weight)}};
  j["solver"] = {{"poisson_tol", c.solver.poisson_tol},   {"max_iter", c.solver.max_iter},
                 {"eig_tol", c.solver.eig_tol},           {"gap_floor", c.solver.gap_floor},
                 {"kernel_tol", optional_number(c.solver.kernel_tol)},
                 {"kernel_max", c.solver.kernel_max},     {"lanczos_max", c.solver.lanczos_max},
                 {"max_restarts", c.solver.max_restarts}, {"seed", c.solver.seed},
                 {"threads", c.solver.threads}};
  const ExperimentConfig& e = c.experiment;
  j["experiment"] = {{"rho0", e.rho0},
                     {"rho1", e.rho1},
                     {"steps", e.steps},
                     {"c", optional_number(e.c)},
                     {"y", e.y},
                     {"R", e.radius},
                     {"alpha", optional_number(e.alpha)},
                     {"floor_mix", optional_number(e.floor_mix)},
                     {"substeps", e.substeps},
                     {"reach_threshold", e.reach_threshold},
                     {"residual_threshold", e.residual_threshold},
                     {"path_times", e.path_times},
                     {"path", e.path},
                     {"transport", e.transport},
                     {"reverse", e.reverse},
                     {"particles", e.particles},
                     {"seed", e.seed},
                     {"invariance_samples", e.invariance_samples},
                     {"tau", optional_number(e.tau)}};
  j["output"] = {{"dir", c.output.dir},
                 {"plots", c.output.plots},
                 {"dump_grid", c.output.dump_grid},
                 {"dump_operator", c.output.dump_operator},
                 {"dump_eigenvector", c.output.dump_eigenvector},
                 {"dump_controls", c.output.dump_controls},
                 {"dump_trajectories", c.output.dump_trajectories}};
  return j;
}

GridDomain build_grid(const GridConfig& config) {
  return GridDomain::build(config.lower, config.upper, config.resolution, config.mask);
}

VectorFieldSet build_fields(const FieldsConfig& config) {
  if (config.builtin) return builtin_fields(*config.builtin);
  return fields_from_expressions("custom", config.dimension, config.components);
}

Eigen::VectorXd nodal_expression(const GridDomain& grid, const std::string& text) {
  const Expression e = Expression::parse(text);
  if (e.max_variable() > grid.dimension()) {
    throw ConfigError("expression '" + text + "' references x" + std::to_string(e.max_variable()) +
                      " but the grid has dimension " + std::to_string(grid.dimension()));
  }
  Eigen::VectorXd v(static_cast<long>(grid.active_count()));
  for (std::size_t a = 0; a < grid.active_count(); ++a) v[static_cast<long>(a)] = e.evaluate(grid.point(a));
  return v;
}

}  // namespace subctrl
