#pragma once

#include <iosfwd>

namespace kbcd::cli {

enum ExitCode : int {
  ok = 0,
  failure = 1,
  config_error = 2,
  parse_error = 3,
  divergence = 4,
  bound_violation = 5,
};

/// Entry point shared by the binary and the tests. Output files land in
/// --out, else $KBCD_OUT_DIR, else the working directory.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kbcd::cli
