#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sensalign {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// Runs the sensalign command line with args[0] as the program name. Results
// go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sensalign
