#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sl0::cli {

// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kParse = 3,
    kRankDeficient = 4,
    kThresholdUnreachable = 5,
    kGuardExceeded = 6,
};

/// Entry point shared by the `sl0` executable and the tests. `args` excludes
/// the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sl0::cli
