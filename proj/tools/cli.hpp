#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace edgecache::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kConfigError = 3,
  kNumericError = 4,
  kBoundFailure = 5,
};

/// Runs one command line (without the program name) and returns the exit code.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace edgecache::cli
