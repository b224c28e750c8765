#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfsim/config.hpp"

namespace gfsim {

/// Exit codes: 0 success / all checks pass, 1 configuration error,
/// 2 some check failed, 3 some check inconclusive (no failure),
/// 4 the task itself failed.
enum ExitCode : int { kOk = 0, kConfigError = 1, kCheckFailed = 2, kInconclusive = 3, kTaskError = 4 };

/// Runs a validated experiment, writing its artifacts and manifest.json into
/// config.output. Returns the exit code.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Full command line entry point (argv[0] included).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gfsim
