#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace reap {

/// Full command-line entry point, in-process so tests can drive it. args is
/// argv without the program name. Exit codes: 0 success, 1 runtime failure,
/// 2 input error.
int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace reap
