#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcfpinn::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kBadInput = 2,
    kDiverged = 3,
};

/// Runs the command line `args` (without the program name). Normal output goes to
/// `out`, diagnostics and progress to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcfpinn::cli
