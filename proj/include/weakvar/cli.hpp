#pragma once

#include <iosfwd>

namespace weakvar::cli {

/// Process exit codes.
inline constexpr int kExitSuccess = 0;
/// A verification check failed or the numerics broke down (instability, conditioning at a node).
inline constexpr int kExitFailure = 1;
/// Invalid command line, configuration or input file.
inline constexpr int kExitUsage = 2;

/// weakvar <command> --config <file> [--set key=value ...] --out <prefix>
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace weakvar::cli
