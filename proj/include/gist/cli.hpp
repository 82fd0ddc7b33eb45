#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gist {

enum ExitCode : int {
  kExitOk = 0,
  kExitUser = 1,      // validation failure or bad arguments
  kExitIo = 2,        // I/O or file format error
  kExitNoProxy = 3,   // offline phase found no usable proxy
};

/// Runs the command line (without the program name). All output goes to
/// `out`/`err`; warnings are routed to `err` for the duration of the call.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gist
