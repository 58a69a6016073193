#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "subctrl/commands.hpp"
#include "subctrl/config.hpp"
#include "subctrl/errors.hpp"
#include "subctrl/plots.hpp"

using namespace subctrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "subctrl_cli_tests" / name;
  fs::remove_all(dir);
  return dir;
}

std::string square(int n, const std::string& fields = "builtin = \"axis2d\"") {
  return "[grid]\nbox = [[0, 0], [1, 1]]\nresolution = [" + std::to_string(n) + ", " + std::to_string(n) +
         "]\n\n[fields]\n" + fields + "\n";
}

const std::string kDegenerate =
    "[grid]\nbox = [[0, 0, 0], [1, 1, 1]]\nresolution = [9, 9, 9]\n\n[fields]\nbuiltin = \"axis3d-degenerate\"\n";

struct Run {
  int status;
  std::string out;
  std::string err;
  fs::path dir;
};

Run run(const std::string& command, const std::string& text, const std::string& name, CommandOptions options = {}) {
  Run r;
  r.dir = scratch(name);
  options.out_dir = r.dir.string();
  std::ostringstream out, err;
  r.status = run_command(command, parse_run_config(text), options, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

nlohmann::json report(const Run& r, const std::string& command) {
  std::ifstream in(r.dir / (command + "_report.json"));
  REQUIRE(in);
  return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct Pgm {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

Pgm read_pgm(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string magic;
  int maxval = 0;
  Pgm img;
  in >> magic >> img.width >> img.height >> maxval;
  in.get();
  REQUIRE(magic == "P5");
  REQUIRE(maxval == 255);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  REQUIRE(in);
  return img;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_run_config(square(5) + "\n[solver]\neig_tol = 1e-9\n\n[experiment]\nR = 0.1\n");
  CHECK(c.grid.resolution == std::vector<int>{5, 5});
  CHECK(c.fields.builtin == std::optional<std::string>("axis2d"));
  CHECK(c.solver.eig_tol == 1e-9);
  CHECK(c.experiment.radius == 0.1);
  CHECK(c.experiment.y == std::vector<double>{0.5, 0.5});

  CHECK_THROWS_AS(parse_run_config(square(5) + "\n[solver]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(square(5) + "\n[extra]\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("x = 1\n" + square(5)), ConfigError);
  CHECK_THROWS_AS(parse_run_config(square(5) + "\n[solver]\npoisson_tol = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(square(5) + "\n[experiment]\nparticles = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(square(5, "builtin = \"axis2d\"\ndimension = 2\nfields = [[\"1\", \"0\"]]")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config("[grid]\nbox = [[0, 0], [1, 1]]\nresolution = [5, 5]\nmask = \"x1 < 0.7\"\n"
                                   "[fields]\nbuiltin = \"axis2d\"\n"),
                  ConfigError);
  const RunConfig masked = parse_run_config(
      "[grid]\nbox = [[0, 0], [1, 1]]\nresolution = [5, 5]\nmask = \"x1 < 0.7\"\nnonbox_heuristic = true\n"
      "[fields]\nbuiltin = \"axis2d\"\n");
  CHECK(build_grid(masked.grid).active_count() == 15);
}

TEST_CASE("gap command") {
  const Run ok = run("gap", square(65), "gap_ok");
  CHECK(ok.status == kSuccess);
  const auto r = report(ok, "gap");
  CHECK(r["schema_version"] == 1);
  CHECK(r["status"] == 0);
  CHECK(std::abs(r["lambda"].get<double>() - M_PI * M_PI) <= 0.02 * M_PI * M_PI);
  CHECK(r["kernel_dim"] == 0);
  CHECK(r["config"]["grid"]["resolution"] == nlohmann::json::array({65, 65}));

  const Run neg = run("gap", kDegenerate, "gap_neg");
  CHECK(neg.status == kNegative);
  CHECK(report(neg, "gap")["kernel_dim"].get<int>() >= 1);
}

TEST_CASE("malformed config and unknown command fail with status 1") {
  const fs::path dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.toml") << "[grid]\nbox = [[0, 0], [1, 1]\n";
  std::ostringstream out, err;
  CHECK(run_command_file("gap", (dir / "bad.toml").string(), {}, out, err) == kFailure);
  CHECK_FALSE(err.str().empty());
  CHECK(run_command_file("gap", (dir / "missing.toml").string(), {}, out, err) == kFailure);
  CHECK(run_command("warp", parse_run_config(square(5)), {}, out, err) == kFailure);
}

TEST_CASE("steer command") {
  const Run same = run("steer", square(17), "steer_same");
  CHECK(same.status == kSuccess);
  CHECK(report(same, "steer")["effort_lhs"] == 0.0);

  const std::string pair = square(33) + "\n[experiment]\nrho1 = \"1 + 0.1*cos(pi*x1)\"\n[output]\ndump_controls = true\n";
  const Run ok = run("steer", pair, "steer_ok");
  CHECK(ok.status == kSuccess);
  const auto r = report(ok, "steer");
  CHECK(r["residual"].get<double>() <= 1e-6);
  CHECK(r["bound_holds"] == true);
  CHECK(r["K"] == 64);
  CHECK(fs::exists(ok.dir / "controls" / "step_0064.csv"));
  CHECK(fs::exists(ok.dir / "potential.csv"));

  const Run neg = run("steer", kDegenerate + "[experiment]\nrho1 = \"1 + 0.5*x3\"\n", "steer_neg");
  CHECK(neg.status == kNegative);
  CHECK(report(neg, "steer")["status"] == 2);
}

TEST_CASE("reach command") {
  const Run ok = run("reach", square(33), "reach_ok");
  CHECK(ok.status == kSuccess);
  const auto r = report(ok, "reach");
  CHECK(r["fraction"].get<double>() >= 0.99);
  CHECK(r["alpha"].get<double>() == doctest::Approx(0.04 / 9));
  CHECK(r["config"]["experiment"]["alpha"].get<double>() == doctest::Approx(0.04 / 9));

  CHECK(run("reach", kDegenerate, "reach_neg").status == kNegative);
  CHECK(run("reach", square(9) + "[experiment]\ny = [1.5, 0.5]\n", "reach_out").status == kFailure);
}

TEST_CASE("kernel command") {
  const Run empty = run("kernel", square(9), "kernel_empty");
  CHECK(empty.status == kSuccess);
  CHECK(report(empty, "kernel")["sets"].empty());

  const Run slices = run("kernel", kDegenerate, "kernel_slices");
  CHECK(slices.status == kNegative);
  const auto r = report(slices, "kernel");
  REQUIRE_FALSE(r["sets"].empty());
  for (const auto& s : r["sets"]) CHECK(s["defect"] == 0.0);

  const Run zero = run("kernel", square(7, "dimension = 2\nfields = [[\"0\", \"0\"]]"), "kernel_zero");
  CHECK(zero.status == kNegative);
}

TEST_CASE("track command") {
  const std::string base = square(17) + "\n[experiment]\npath_times = [0, 0.5, 1]\n";
  const Run still = run("track", base + "path = [\"1\", \"1\", \"1\"]\n", "track_still");
  CHECK(still.status == kSuccess);
  CHECK(report(still, "track")["max_control"].get<double>() <= 1e-12);

  const std::string linear = base + "path = [\"1\", \"1 + 0.05*cos(pi*x1)\", \"1 + 0.1*cos(pi*x1)\"]\n";
  const Run tracked = run("track", linear, "track_linear");
  CHECK(tracked.status == kSuccess);
  const Run steered =
      run("steer", square(17) + "\n[experiment]\nsteps = 2\nrho1 = \"1 + 0.1*cos(pi*x1)\"\n", "track_steer");
  const double a = report(tracked, "track")["max_control"].get<double>();
  const double b = report(steered, "steer")["max_control"].get<double>();
  CHECK(std::abs(a - b) <= 1e-8 * b);

  const Run floor = run("track", base + "path = [\"1\", \"x1\", \"1\"]\n", "track_floor");
  CHECK(floor.status == kFailure);
  CHECK(floor.err.find("time index 1") != std::string::npos);
}

TEST_CASE("dry run validates without writing") {
  CommandOptions o;
  o.dry_run = true;
  const Run r = run("reach", square(33), "dry", o);
  CHECK(r.status == kSuccess);
  CHECK_FALSE(fs::exists(r.dir));
  CHECK(run("steer", square(9) + "[experiment]\nrho1 = \"x3\"\n", "dry_bad", o).status == kFailure);
}

TEST_CASE("reports are byte-identical across runs") {
  const std::string text = square(17) + "\n[experiment]\nrho1 = \"1 + 0.2*x1\"\ntransport = true\nparticles = 500\n";
  for (const std::string command : {"gap", "steer", "reach", "kernel"}) {
    CAPTURE(command);
    const Run a = run(command, text, "repro_a");
    const std::string first = slurp(a.dir / (command + "_report.json"));
    const Run b = run(command, text, "repro_a");
    CHECK(a.status == b.status);
    CHECK(first == slurp(b.dir / (command + "_report.json")));
  }
}

TEST_CASE("plots") {
  CommandOptions o;
  o.plots = true;
  const Run steer = run("steer", square(9), "plots_uniform", o);
  CHECK(steer.status == kSuccess);
  const Pgm uniform = read_pgm(steer.dir / "rho0.pgm");
  CHECK(uniform.width == 9);
  for (auto p : uniform.pixels) CHECK(p == 128);

  // A 1 x 0.8 box makes cos(pi x1) the unique lowest mode.
  const Run gap = run("gap",
                      "[grid]\nbox = [[0, 0], [1, 0.8]]\nresolution = [17, 13]\n[fields]\nbuiltin = \"axis2d\"\n",
                      "plots_gap", o);
  const Pgm eig = read_pgm(gap.dir / "eigenvector.pgm");
  CHECK(fs::exists(gap.dir / "ritz_history.csv"));
  // Each row monotone and identical, one sign change.
  int sign_changes = 0;
  for (int row = 0; row < eig.height; ++row) {
    const auto* line = &eig.pixels[static_cast<std::size_t>(row) * eig.width];
    const bool increasing = line[eig.width - 1] > line[0];
    for (int col = 1; col < eig.width; ++col) {
      CHECK(std::abs(int(line[col]) - int(eig.pixels[col])) <= 1);
      CHECK((increasing ? line[col] >= line[col - 1] : line[col] <= line[col - 1]));
      if (row == 0) sign_changes += (line[col] >= 128) != (line[col - 1] >= 128);
    }
  }
  CHECK(sign_changes == 1);

  const Run cube = run("gap", kDegenerate, "plots_cube", o);
  int images = 0;
  for (const auto& e : fs::directory_iterator(cube.dir)) images += e.path().extension() == ".pgm";
  CHECK(images == 3);
}

TEST_CASE("plot failures do not change the exit status") {
  CommandOptions o;
  o.plots = true;
  const fs::path dir = scratch("plots_blocked");
  fs::create_directories(dir / "eigenvector.pgm");
  o.out_dir = dir.string();
  std::ostringstream out, err;
  CHECK(run_command("gap", parse_run_config(square(9)), o, out, err) == kSuccess);
  CHECK(err.str().find("warning") != std::string::npos);
}

TEST_CASE("gray levels") {
  CHECK(gray_levels({2.0, 2.0, 2.0}) == std::vector<std::uint8_t>{128, 128, 128});
  CHECK(gray_levels({0.0, 0.5, 1.0}) == std::vector<std::uint8_t>{0, 128, 255});
}
