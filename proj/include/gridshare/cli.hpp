#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace gridshare::cli {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes of run_command.
enum ExitCode : int { kOk = 0, kUsage = 2, kValidation = 3, kFailure = 4 };

/// Entry point behind the `gridshare` executable. argv[0] is the program name.
/// Subcommands: allocate, simulate, stationary, sweep, critical, heatmap.
/// Each writes <out>/<subcommand>.csv and <out>/<subcommand>.manifest.
int run_command(const std::vector<std::string>& argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr);

}  // namespace gridshare::cli
