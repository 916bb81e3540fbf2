#pragma once

#include <iosfwd>

namespace gnas {

/// Exit status of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitUsage = 2 };

/// Runs one `gnas` invocation. Machine output goes to `out`, diagnostics to
/// `err`.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gnas
