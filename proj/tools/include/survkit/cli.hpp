#pragma once

namespace survkit {

// Parses and executes one toolkit command line; argv follows the main()
// layout (argv[0] is the program name). Returns the process exit code:
// 0 success, 2 input error, 3 numerical failure. Diagnostics go to stderr.
int run_cli(int argc, const char* const* argv);

}  // namespace survkit
