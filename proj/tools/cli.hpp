#pragma once

#include <iosfwd>

namespace chime::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingFile = 3,
  kBadInput = 4,
  kIncompatible = 5,
  kNumeric = 6,
  kIdMismatch = 7,
};

/// Entry point for the `chime` tool. Errors are reported on `err` as one
/// line: error: kind=<name> exit=<code> message="<text>".
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace chime::cli
