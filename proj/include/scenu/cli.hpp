#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scenu {

// Exit codes: 0 success, 1 domain violation or parse error, 2 I/O or usage error.
enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitUsage = 2 };

// Entry point of the `scenu` binary; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scenu
