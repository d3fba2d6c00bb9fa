#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sqr::cli {

enum ExitCode : int { kOk = 0, kUserError = 1, kInternalError = 2 };

/// Runs the `sqr` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sqr::cli
