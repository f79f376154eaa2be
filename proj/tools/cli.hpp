#pragma once

#include <ostream>

namespace wlm::cli {

// Exit codes are a stable contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitCheckFailed = 2;
inline constexpr int kExitCap = 3;

// Runs one subcommand. The report (JSON, or CSV with --csv) goes to `out`, the
// human summary and error messages to `err`. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wlm::cli
