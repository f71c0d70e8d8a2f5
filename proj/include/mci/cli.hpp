#pragma once

// Command-line surface: measure, train, sweep, generate.
// Exit codes: 0 success, 1 data or numerical failure, 2 usage error.

#include <iosfwd>
#include <string>
#include <vector>

namespace mci {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default report directory.
inline constexpr const char* kReportDirEnv = "MCI_REPORT_DIR";

/// `args` excludes the program name. Reports go to --out, else to
/// $MCI_REPORT_DIR/<command>-report.json, else to `out`. Diagnostics and the
/// human-readable summary go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mci
