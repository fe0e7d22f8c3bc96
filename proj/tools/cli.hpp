#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lmk::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericError = 3,
};

/// Run the `landmark-kit` command line with `args` (program name excluded).
/// Regular output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lmk::cli
