#pragma once

#include "quasilin/cli/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

namespace quasilin::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kInputError = 1, kDomainFailure = 2 };

struct CommandOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::string format = "csv";            // trajectories: "csv" or "json"
    std::optional<double> tolerance;       // overrides the pass/fail residual threshold
};

/// Everything a command produces: the JSON report (also written to
/// <out>/<command>.json) and any extra files keyed by file name.
struct Outcome {
    int exit_code = kOk;
    nlohmann::json report;
    std::map<std::string, std::string> files;
};

/// Runs one of check, build, moments, steady, stability, oracle on a parsed
/// config. Never throws for module errors; they become exit code 2.
Outcome run(const std::string& command, const Config& config, const CommandOptions& options);

/// Loads the config, runs the command, writes the result files, prints the
/// report on `out` and diagnostics on `err`. Returns the exit code.
int run_command(const std::string& command, const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Locale-independent shortest round-trip text of a double.
std::string format_double(double x);

}  // namespace quasilin::cli
