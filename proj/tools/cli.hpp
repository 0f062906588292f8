#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dfs::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kInternal = 3,
};

// Runs one `dfstag` invocation; args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dfs::cli
