// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "subctrl/commands.hpp"
#include "subctrl/config.hpp"
#include "subctrl/control.hpp"
#include "subctrl/errors.hpp"
#include "subctrl/fields.hpp"
#include "subctrl/grid.hpp"
#include "subctrl/operators.hpp"
#include "subctrl/spectral.hpp"
#include "subctrl/transport.hpp"

using namespace subctrl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const char* title, double budget_seconds, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (seconds > budget_seconds) {
    o.pass = false;
    o.detail << " [runtime " << seconds << " s exceeds " << budget_seconds << " s]";
  }
  std::printf("%s %d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.str().c_str(), seconds);
  std::fflush(stdout);
  failures += !o.pass;
}

GridDomain cube(int d, double lo, double hi, int n) {
  return GridDomain::build(std::vector<double>(d, lo), std::vector<double>(d, hi), std::vector<int>(d, n));
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

VectorFieldSet random_system(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 3), pick(0, 4);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  const int d = dim(rng);
  const int m = std::uniform_int_distribution<int>(1, d)(rng);
  std::vector<std::vector<std::string>> components;
  for (int i = 0; i < m; ++i) {
    std::vector<std::string> g;
    for (int a = 0; a < d; ++a) {
      const std::string var = "x" + std::to_string(1 + (a + i) % d);
      const std::string c = std::to_string(coef(rng));
      switch (pick(rng)) {
        case 0: g.push_back(c); break;
        case 1: g.push_back(c + "*" + var); break;
        case 2: g.push_back("sin(" + c + "*" + var + ")"); break;
        case 3: g.push_back(var + "^2 - " + c); break;
        default: g.push_back("exp(" + c + "*" + var + ")/3"); break;
      }
    }
    components.push_back(g);
  }
  return fields_from_expressions("random", d, components);
}

bool structurally_sound(const DiscreteOperator& op) {
  const Eigen::MatrixXd L(op.stiffness);
  const double scale = std::max(1.0, L.cwiseAbs().maxCoeff());
  const bool symmetric = (L - L.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L, Eigen::EigenvaluesOnly);
  const bool psd = eig.eigenvalues().minCoeff() >= -1e-10 * scale;
  const bool constants = op.apply(Eigen::VectorXd::Constant(op.size(), 1.0)).cwiseAbs().maxCoeff() == 0.0;
  return symmetric && psd && constants;
}

DensityField random_density(const GridDomain& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.8);
  Eigen::VectorXd v(static_cast<long>(g.active_count()));
  for (long a = 0; a < v.size(); ++a) v[a] = u(rng);
  return DensityField::normalized(g, v);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_quiet(const std::string& command, const std::string& text, const fs::path& dir) {
  CommandOptions options;
  options.out_dir = dir.string();
  std::ostringstream out, err;
  return run_command(command, parse_run_config(text), options, out, err);
}

}  // namespace

int main() {
  criterion(1, "operator correctness", 1.0, [](Outcome& o) {
    Eigen::Matrix3d k1d;
    k1d << 3, -4, 1, -4, 8, -4, 1, -4, 3;
    const Eigen::Matrix3d w = Eigen::Vector3d(0.25, 0.5, 0.25).asDiagonal();
    const Eigen::MatrixXd expected = kron(k1d, w) + kron(w, k1d);
    const auto op = assemble_form_operator(cube(2, 0.0, 1.0, 3), builtin_fields("axis2d"));
    const double err = (Eigen::MatrixXd(op.stiffness) - expected).cwiseAbs().maxCoeff();
    o.detail << "3x3 max entry error " << err;
    o.require(err <= 1e-14, "hand-assembled matrix");

    int sound = 0, total = 0;
    for (const auto& name : builtin_field_names()) {
      const auto f = builtin_fields(name);
      sound += structurally_sound(assemble_form_operator(cube(f.dimension(), -1.0, 1.0, f.dimension() == 2 ? 9 : 5), f));
      ++total;
    }
    std::mt19937_64 rng(2024);
    for (int s = 0; s < 20; ++s) {
      const auto f = random_system(rng);
      sound += structurally_sound(assemble_form_operator(cube(f.dimension(), -1.0, 1.0, f.dimension() == 3 ? 5 : 7), f));
      ++total;
    }
    o.detail << ", symmetric PSD with constant kernel " << sound << "/" << total;
    o.require(sound == total, "symmetry / PSD / constant kernel");
  });

  criterion(2, "spectral oracle", 30.0, [](Outcome& o) {
    const double exact = M_PI * M_PI;
    double errors[3];
    const int cells[3] = {16, 32, 64};
    for (int k = 0; k < 3; ++k) {
      const auto op = assemble_form_operator(cube(2, 0.0, 1.0, cells[k] + 1), builtin_fields("axis2d"));
      errors[k] = std::abs(spectral_gap(op).lambda - exact);
    }
    const double rel = errors[2] / exact;
    const double p1 = std::log2(errors[0] / errors[1]);
    const double p2 = std::log2(errors[1] / errors[2]);
    o.detail << "64x64 relative error " << rel << ", orders " << p1 << " " << p2;
    o.require(rel <= 0.02, "lambda within 2% of pi^2");
    o.require(p1 >= 1.9 && p2 >= 1.9, "convergence order >= 1.9");
  });

  criterion(3, "certified negative", 30.0, [](Outcome& o) {
    const auto g = cube(3, 0.0, 1.0, 9);
    const auto f = builtin_fields("axis3d-degenerate");
    const auto op = assemble_form_operator(g, f);
    const double lambda = spectral_gap(op).lambda;
    const auto basis = kernel_basis(op, 1e-8, 16);
    const auto sets = detect_invariant_sets(op, g, f, 1e-8);
    bool slices = !sets.empty();
    double defect = 0.0;
    for (const auto& s : sets) {
      defect = std::max(defect, s.defect);
      for (std::size_t a = 0; a < g.active_count(); ++a) slices = slices && s.indicator[a] == s.indicator[a % 9];
    }
    o.detail << "lambda " << lambda << ", kernel vectors " << basis.size() << ", invariant sets " << sets.size()
             << ", max defect " << defect;
    o.require(lambda <= 1e-10, "lambda <= 1e-10");
    o.require(basis.size() >= 8, ">= 8 kernel vectors");
    o.require(slices, "x3-slice partitions");
    o.require(defect == 0.0, "zero invariance defect");
  });

  criterion(4, "steering at desk scale", 300.0, [](Outcome& o) {
    const auto g = cube(3, -1.0, 1.0, 17);
    const auto op = assemble_form_operator(g, builtin_fields("heisenberg"));
    PoissonOptions options;
    options.tolerance = 1e-9;
    const PoissonSolver solver(op, options);
    const double c = default_density_floor(g);
    std::mt19937_64 rng(4);
    double worst = 0.0, worst_ratio = 0.0;
    int holds = 0;
    for (int s = 0; s < 10; ++s) {
      const auto r0 = random_density(g, rng);
      const auto r1 = random_density(g, rng);
      const Eigen::VectorXd f = steering_potential(solver, r0, r1, c);
      const auto controls = steering_controls(op, f, r0, r1, uniform_times(16), c);
      worst = std::max(worst, continuity_residual(controls, op));
      const auto e = energy_bound(op, f, solver.gap().lambda, solver.gap().floor, r0, r1);
      holds += e.holds;
      worst_ratio = std::max(worst_ratio, e.ratio);
    }
    o.detail << "max residual " << worst << ", energy bound holds " << holds << "/10 (max index " << worst_ratio << ")";
    o.require(worst <= 10 * options.tolerance, "residual <= 10x Poisson tolerance");
    o.require(holds == 10, "energy bound");
  });

  criterion(5, "transport", 120.0, [](Outcome& o) {
    const auto g = cube(2, 0.0, 1.0, 33);
    const auto f = builtin_fields("axis2d");
    const auto op = assemble_form_operator(g, f);
    const PoissonSolver solver(op);
    const auto r0 = DensityField::uniform(g);
    const auto r1 = DensityField(g, (1.0 + 0.1 * (M_PI * g.coordinate(0).array()).cos()).matrix());
    const double c = default_density_floor(g);
    const int K = 64;
    const auto controls = steering_controls(op, steering_potential(solver, r0, r1, c), r0, r1, uniform_times(K), c);
    double distance[2];
    const std::size_t counts[2] = {100000, 400000};
    bool exits_ok = true;
    for (int k = 0; k < 2; ++k) {
      const auto start = sample_density(r0, counts[k], 2024 + k);
      const auto end = integrate_ensemble(start, controls, f);
      distance[k] = density_distance(end, r1);
      exits_ok = exits_ok && end.exits <= 0.01 * static_cast<double>(counts[k]) * K;
      o.detail << (k ? ", " : "") << "P=" << counts[k] << " distance " << distance[k] << " exits " << end.exits;
    }
    o.require(distance[0] <= 0.15, "distance <= 0.15 at P=1e5");
    o.require(distance[1] <= 0.10, "distance <= 0.10 at P=4e5");
    o.require(distance[1] < distance[0], "monotone improvement");
    o.require(exits_ok, "exit events <= 0.01 P K");
  });

  criterion(6, "reachability experiment", 600.0, [](Outcome& o) {
    {
      const auto g = cube(2, 0.0, 1.0, 33);
      const auto f = builtin_fields("axis2d");
      ReachOptions r;
      r.target = {0.5, 0.5};
      r.radius = 0.2;
      r.alpha = std::pow(r.radius / 3.0, 2);
      const auto rep = reach_experiment(f, g, assemble_form_operator(g, f), r);
      o.detail << "axis2d fraction " << rep.fraction;
      o.require(rep.fraction >= 0.99, "axis2d fraction >= 0.99");
    }
    {
      const auto g = cube(3, -1.0, 1.0, 17);
      const auto f = builtin_fields("heisenberg");
      ReachOptions r;
      r.target = {0.0, 0.0, 0.0};
      r.radius = 0.3;
      r.alpha = 0.02;
      const auto rep = reach_experiment(f, g, assemble_form_operator(g, f), r);
      o.detail << ", heisenberg fraction " << rep.fraction;
      o.require(rep.fraction >= 0.95, "heisenberg fraction >= 0.95");
    }
    const fs::path dir = fs::temp_directory_path() / "subctrl_acceptance" / "reach_degenerate";
    fs::remove_all(dir);
    const int status = run_quiet("reach",
                                 "[grid]\nbox = [[0, 0, 0], [1, 1, 1]]\nresolution = [9, 9, 9]\n"
                                 "[fields]\nbuiltin = \"axis3d-degenerate\"\n",
                                 dir);
    o.detail << ", axis3d-degenerate status " << status;
    o.require(status == kNegative, "degenerate status 2");
  });

  criterion(7, "slice-preserving flow", 120.0, [](Outcome& o) {
    const auto g = cube(3, 0.0, 1.0, 9);
    const auto f = builtin_fields("axis3d-degenerate");
    const int K = 16;
    const long n = static_cast<long>(g.active_count());
    const Eigen::VectorXd x1 = g.coordinate(0), x2 = g.coordinate(1), x3 = g.coordinate(2);
    std::vector<Eigen::MatrixXd> controls;
    const auto times = uniform_times(K);
    for (double t : times) {
      Eigen::MatrixXd u(n, 2);
      u.col(0) = (2 * M_PI * (x2.array() + x3.array() + t)).sin();
      u.col(1) = (2 * M_PI * (x1.array() - t)).cos() * (1.0 + x3.array());
      controls.push_back(u);
    }
    const auto rho = DensityField::normalized(g, (1.0 + 2.0 * x3.array() + x1.array()).matrix());
    const ControlField field(g, times, std::vector<Eigen::VectorXd>(K + 1, rho.values()), {}, controls,
                             default_density_floor(g));
    const std::size_t P = 20000;
    const double bound = 3.0 * std::sqrt(static_cast<double>(P));
    long worst_crossings = 0, worst_excess = 0;
    for (int run = 0; run < 20; ++run) {
      const auto start = sample_density(rho, P, 100 + run);
      const auto end = integrate_ensemble(start, field, f);
      const SliceFlow flow = slice_mass_flow(g, 2, start, end);
      worst_crossings = std::max(worst_crossings, flow.crossings);
      worst_excess = std::max(worst_excess, flow.max_excess);
    }
    o.detail << "20 runs of P=" << P << ": max crossings " << worst_crossings << ", max slice excess "
             << worst_excess << " (bound " << bound << ")";
    o.require(worst_crossings <= bound && worst_excess <= bound, "x3-slice mass preserved");
  });

  criterion(8, "reproducibility", 300.0, [](Outcome& o) {
    const std::string square =
        "[grid]\nbox = [[0, 0], [1, 1]]\nresolution = [17, 17]\n[fields]\nbuiltin = \"grushin\"\n"
        "[solver]\nthreads = 1\n";
    const std::string experiment =
        "[experiment]\nrho1 = \"1 + 0.3*x1*x2\"\ny = [0.7, 0.4]\ntransport = true\nreverse = true\n"
        "particles = 2000\npath_times = [0, 0.3, 1]\npath = [\"1\", \"1 + 0.1*x2\", \"1 + 0.3*x1*x2\"]\n"
        "[output]\ndump_controls = true\n";
    const fs::path dir = fs::temp_directory_path() / "subctrl_acceptance" / "repro";
    int identical = 0;
    for (const std::string command : command_names()) {
      fs::remove_all(dir);
      const int s1 = run_quiet(command, square + experiment, dir);
      const std::string first = slurp(dir / (command + "_report.json"));
      fs::remove_all(dir);
      const int s2 = run_quiet(command, square + experiment, dir);
      const std::string second = slurp(dir / (command + "_report.json"));
      const bool same = s1 == s2 && !first.empty() && first == second;
      identical += same;
      if (!same) o.detail << command << " differs; ";
    }
    o.detail << identical << "/" << command_names().size() << " subcommands byte-identical";
    o.require(identical == static_cast<int>(command_names().size()), "byte-identical reports");
  });

  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
