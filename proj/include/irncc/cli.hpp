#pragma once

#include <iosfwd>

namespace irncc {

/// Command-line entry point. Exit codes: 0 success (including --help),
/// 1 runtime error, 2 usage error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, const char* const* argv);

}  // namespace irncc
