#pragma once

#include <iosfwd>

namespace lidarseg::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

// Entry point of the `lidarseg` tool; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lidarseg::cli
