#pragma once

#include "ersc/config.hpp"
#include "ersc/report.hpp"

#include <string>
#include <vector>

namespace ersc {

const std::vector<std::string>& known_commands();

/// Unknown command name.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dispatches one command on a validated configuration.
RunReport run_command(const std::string& command, const RunConfig& config);

/// Exit status for an in-flight exception: 2 validation, 3 convergence or
/// reducibility, 4 usage, 5 I/O, 1 anything else.
int exit_status_for(const std::exception& e);
/// Machine-parsable category used in "error[<category>]: message".
const char* error_category(const std::exception& e);

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitConvergence = 3;
inline constexpr int kExitUsage = 4;
inline constexpr int kExitIo = 5;
inline constexpr int kExitCheckFailed = 6;

}  // namespace ersc
