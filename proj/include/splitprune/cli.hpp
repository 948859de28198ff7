#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace splitprune::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kConfigError = 2,
  kRefused = 3,
};

// Entry point shared by the executable and the tests. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace splitprune::cli
