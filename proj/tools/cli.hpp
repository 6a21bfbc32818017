#pragma once

#include <ostream>

namespace et2q::cli {

/// Runs one command line (argv[0] is the program name). Returns the process
/// exit code: 0 on success, 1 on runtime errors, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace et2q::cli
