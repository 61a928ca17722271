#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spdagg {

/// Entry point of the spd-agg tool. Returns the process exit code:
/// 0 success, 1 runtime failure (or failing gradient check), 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace spdagg
