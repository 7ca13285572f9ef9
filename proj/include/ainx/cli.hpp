#pragma once

#include <ostream>

namespace ainx::cli {

/// Runs the `ainx` command line. Returns 0 on success, 2 for usage errors
/// (unknown flag or subcommand, bad option value) and 1 for operational
/// failures, whose message goes to `err`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ainx::cli
