#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pmc {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfigInvalid = 2,
  kExitSolverFailure = 3,
};

struct RunOptions {
  std::string subcommand;  // solve, check-barrier, check-monotone, transform, reparam,
                           // diagnose, eval-residual
  std::string config_path;
  std::optional<std::string> out_report;
  std::optional<std::string> out_field;
  std::optional<int> levels;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

/// Runs one subcommand and writes its report (to stdout when no report path
/// is configured). Diagnostics go to `log`.
int run(const RunOptions& options, std::ostream& log);

}  // namespace pmc
