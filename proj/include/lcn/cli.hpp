// Command-line entry point: train / train-ensemble / predict / eval /
// convert / tree-to-lcn / export-dot / verify.
#pragma once

#include <string>
#include <vector>

namespace lcn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitDivergence = 4;
inline constexpr int kExitVerification = 5;

// args excludes the program name. Writes human-readable output to stdout
// and error messages to stderr; returns one of the exit codes above.
int run(const std::vector<std::string>& args);

}  // namespace lcn::cli
