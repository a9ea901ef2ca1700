#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace threadscope {

/// Runs the command line `args` (without the program name). Exit status: 0 on
/// success, 1 on a runtime failure, 2 on a usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace threadscope
