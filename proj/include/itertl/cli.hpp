// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace itertl::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;  // analyze: syntax error found
inline constexpr int kExitUsage = 2;        // bad flags, config or input files
inline constexpr int kExitRuntime = 3;      // backend or other runtime failure

// Entry point of the `itertl` command. args[0] is the program name. Machine
// output goes to `out`, diagnostics and progress to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace itertl::cli
