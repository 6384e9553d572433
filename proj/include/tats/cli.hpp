#pragma once

#include <iosfwd>

namespace tats {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDivergence = 3;

// Entry point of the `tats` tool: gen-data, train-codec, train-prior,
// train-classifier, generate, evaluate, report.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tats
