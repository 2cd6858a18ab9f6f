#pragma once

// Command-line front end: ingest, stats, coreset, trace, bench, serve, generate.

#include <iosfwd>

namespace idtrace::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitResource = 4;

// Runs one subcommand. Results go to `out`, diagnostics and interactive
// prompts to `err`; interactive answers are read from `in`.
int dispatch(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace idtrace::cli
