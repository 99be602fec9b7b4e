#pragma once

#include <string>
#include <vector>

namespace pimc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Runs one command line (argv[0] is the program name) and returns the exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace pimc::cli
