#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace debacer::cli {

// Exit codes per error class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // unexpected failure
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTraining = 4;

// Runs the command line. Reports go to `out` unless --report names a file;
// diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace debacer::cli
