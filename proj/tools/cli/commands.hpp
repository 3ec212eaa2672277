#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pitchnet::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
};

/// Runs the `pitchnet` command line (args excludes the program name).
/// Failures print one line `pitchnet: <reason>: <message>` to `err`, where
/// reason is usage-error, data-error or io-error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace pitchnet::cli
