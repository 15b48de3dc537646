#pragma once

// JSON system description consumed by the quasilin command-line tool.

#include "quasilin/classical_oracle.hpp"
#include "quasilin/moment_dynamics.hpp"
#include "quasilin/system_model.hpp"
#include "quasilin/tolerance.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace quasilin::cli {

/// Malformed configuration (syntax, unknown keys, shapes). Maps to exit code 1.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    std::size_t r_max = 2;
    double t_final = 1.0;
    std::size_t t_points = 11;
    PropagationMethod method = PropagationMethod::RungeKutta45;
};

struct InitialStateConfig {
    std::optional<GaussianState> gaussian;
    std::map<std::string, Complex> moments;  // used when gaussian is empty
};

struct ClassicalConfig {
    ClassicalSde sde;
    InitialDistribution x0;
    std::size_t paths = 100'000;
    double dt = 1e-3;
    double t_final = 2.0;
    std::size_t r_max = 3;
};

struct Config {
    std::size_t n = 0;
    std::optional<std::size_t> m;
    std::optional<SystemParams> plant;
    std::optional<QuasilinearSystem> quasilinear;
    std::optional<ClassicalConfig> classical;
    std::optional<InitialStateConfig> initial_state;
    RunConfig run;
    TolerancePolicy tolerance;
    std::uint64_t hash = 0;  // FNV-1a of the canonical JSON text
};

Config parse_config(const nlohmann::json& doc);
/// Reads and parses a file; throws ConfigError when it cannot be read or parsed.
Config load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view text);

}  // namespace quasilin::cli
