#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fuel::cli {

inline constexpr double kDefaultCi = 518.0;  // gCO2eq/kWh

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitViolations = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitSpec = 3;
inline constexpr int kExitCompute = 4;
inline constexpr int kExitUsage = 5;

/// Runs the `fuel` command line. `args` excludes the program name.
/// Documents go to `out`, diagnostics to `err`; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fuel::cli
