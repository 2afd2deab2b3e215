#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace harmonika::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kInputError = 2;
inline constexpr int kDegenerateData = 3;

// Runs the command line `args` (args[0] is the program name). Primary
// output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace harmonika::cli
