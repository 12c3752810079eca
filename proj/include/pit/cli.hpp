#pragma once

#include <string>
#include <vector>

#include "pit/search.hpp"

namespace pit {

/// Process exit codes of the pit command.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitVerification = 4,
  kExitCapExceeded = 5,
};

/// Entry point of the pit command line tool.
int run_cli(int argc, char** argv);

/// Static SVG with two scatter panels (metric vs weights, metric vs MACs, log
/// cost axes); front points are filled.
std::string pareto_svg(const std::vector<ParetoPoint>& points, const std::vector<std::size_t>& front);

}  // namespace pit
