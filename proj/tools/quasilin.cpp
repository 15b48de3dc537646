#include "quasilin/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Quasilinear quantum stochastic systems: realizability, moments, stability"};
    app.require_subcommand(1);

    quasilin::cli::CommandOptions options;
    double tolerance = 0.0;

    const std::pair<const char*, const char*> commands[] = {
        {"check", "Check the CCR-preservation conditions of the plant"},
        {"build", "Build the quasilinear system (A, beta, B, ...)"},
        {"moments", "Propagate mixed moments up to run.r_max"},
        {"steady", "Steady-state mean and covariance"},
        {"stability", "Quadratic stability verdict"},
        {"oracle", "Monte-Carlo comparison for the classical block"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", options.config_path, "System description (JSON)")->required();
        sub->add_option("--out", options.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", options.seed, "Random seed")->capture_default_str();
        sub->add_option("--format", options.format, "Trajectory format")
            ->check(CLI::IsMember({"json", "csv"}))
            ->capture_default_str();
        sub->add_option("--tolerance", tolerance, "Pass/fail residual threshold (overrides the config)")
            ->check(CLI::NonNegativeNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : quasilin::cli::kInputError;
    }

    CLI::App* selected = app.get_subcommands().front();
    if (selected->count("--tolerance") > 0) options.tolerance = tolerance;
    return quasilin::cli::run_command(selected->get_name(), options, std::cout, std::cerr);
}
