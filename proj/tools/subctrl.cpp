#include <CLI11.hpp>
#include <iostream>

#include "subctrl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Steering densities with sub-Riemannian control systems"};
  app.require_subcommand(1, 1);

  std::string config_path;
  subctrl::CommandOptions options;
  std::string out_dir;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gap", "spectral gap of the sub-Laplacian"},
      {"steer", "synthesize controls between two densities"},
      {"reach", "approximate reachability of a ball"},
      {"kernel", "near-kernel and candidate invariant sets"},
      {"track", "exact tracking of a density path"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "run config file")->required();
    sub->add_flag("--dry-run", options.dry_run, "validate the config and exit");
    sub->add_flag("--plots", options.plots, "write heatmaps and series CSVs");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : subctrl::kFailure;
  }
  if (!out_dir.empty()) options.out_dir = out_dir;
  const std::string command = app.get_subcommands().front()->get_name();
  return subctrl::run_command_file(command, config_path, options, std::cout, std::cerr);
}
