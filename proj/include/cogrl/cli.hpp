#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace cogrl::cli {

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,      // unknown subcommand or flag, bad flag value
  kInput = 3,      // InputError: missing or malformed input files
  kConfig = 4,     // DimensionError, ConfigError
  kNumeric = 5,    // NumericError, FitError, failed gradient check
  kInternal = 70,  // anything else
};

// Runs one command line. Primary results go to files named by flags, human
// summaries to `out`, diagnostics and the one-line JSON run manifest to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a, as hex in the manifest.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace cogrl::cli
