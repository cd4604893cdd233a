#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dimer/error.hpp"

namespace dimer::cli {

// Exit statuses. Library errors map to kFirstLibraryExit + the position of
// the kind in ErrorKind, except the three with fixed codes below.
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kUsage = 2;
inline constexpr int kConfigParse = 3;
inline constexpr int kRegionParse = 4;
inline constexpr int kUntilable = 5;
inline constexpr int kOutput = 6;
inline constexpr int kFirstLibraryExit = 10;

int exit_code(ErrorKind kind);

inline constexpr int kReportSchemaVersion = 1;

// Runs one command line (args[0] is the program name). Artifacts go to the
// output directory; summaries to `out`; one "error: tag=... exit=..." line to
// `err` on failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dimer::cli
