#pragma once

#include <stdexcept>
#include <string>

namespace pcc {

// Exit codes used by the command line tools. Library code throws the
// exception types below; main() maps them to these process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitVerify = 4,
};

// Bad or inconsistent configuration (unknown keys, out-of-range values).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unusable input data, and non-finite values produced at
// run time (a diverged training run is a data error, not a crash).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A verification pass (theory oracle, gradient check) found a violation.
struct VerifyError : std::runtime_error {
  explicit VerifyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pcc
