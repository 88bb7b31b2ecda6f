#pragma once

#include <ostream>

namespace treestealer::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kPartial = 2, kFailure = 3 };

// Parses argv and dispatches one subcommand. Human-readable summaries go to
// `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace treestealer::cli
