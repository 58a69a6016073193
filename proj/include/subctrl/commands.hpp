#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "subctrl/config.hpp"

namespace subctrl {

/// Process exit statuses. kNegative marks a certified mathematical negative
/// (near-kernel found, system not certifiably controllable).
enum ExitStatus : int { kSuccess = 0, kFailure = 1, kNegative = 2 };

struct CommandOptions {
  bool dry_run = false;
  bool plots = false;                  // forces output.plots on
  std::optional<std::string> out_dir;  // overrides output.dir
};

const std::vector<std::string>& command_names();

/// Runs `subctrl <command>` on a parsed config. Writes
/// `<dir>/<command>_report.json` plus the enabled dumps and plots, prints a
/// one-line summary to `out` and diagnostics to `err`, and returns 0, 1 or 2.
int run_command(const std::string& command, RunConfig config, const CommandOptions& options, std::ostream& out,
                std::ostream& err);

/// Loads the config file first; any load failure is status 1.
int run_command_file(const std::string& command, const std::string& config_path, const CommandOptions& options,
                     std::ostream& out, std::ostream& err);

}  // namespace subctrl
