#include "quasilin/cli/commands.hpp"

#include "quasilin/classical_oracle.hpp"
#include "quasilin/errors.hpp"
#include "quasilin/moment_dynamics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace quasilin::cli {

using nlohmann::json;

namespace {

json to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

json to_json(const std::vector<Eigen::MatrixXd>& list) {
    json out = json::array();
    for (const auto& m : list) out.push_back(to_json(m));
    return out;
}

json check_json(const ResidualCheck& c) { return {{"passed", c.passed}, {"max_residual", c.max_residual}}; }

json report_json(const RealizabilityReport& r) {
    json out = {{"passed", r.passed()},
                {"m_op_zero", check_json(r.m_op_zero)},
                {"r_op_zero_sym", check_json(r.r_op_zero_sym)},
                {"kron_test_residual", r.kron_test_residual},
                {"phi_symmetry_residuals", r.phi_symmetry_residuals}};
    out["pr_residual"] = r.pr_residual ? json(*r.pr_residual) : json(nullptr);
    return out;
}

json quasilinear_json(const QuasilinearSystem& sys) {
    return {{"A", to_json(sys.a_mat)},       {"beta", to_json(sys.beta)}, {"B", to_json(sys.b_mat)},
            {"lin_disp", to_json(sys.lin_disp)}, {"theta", to_json(sys.theta)}, {"V", to_json(sys.v_mat)},
            {"J", to_json(sys.j_mat)}};
}

std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

TolerancePolicy effective_tolerance(const Config& cfg, const CommandOptions& opt) {
    TolerancePolicy tol = cfg.tolerance;
    if (opt.tolerance) tol.residual = *opt.tolerance;
    return tol;
}

std::optional<SystemParams> plant_with(const Config& cfg, const TolerancePolicy& tol) {
    if (!cfg.plant) return std::nullopt;
    SystemParams p = *cfg.plant;
    p.tolerance = tol;
    return p;
}

// The system the dynamics commands operate on: an explicit quasilinear
// block, else the plant, else the commutative system of the classical block.
QuasilinearSystem resolve_system(const Config& cfg, const TolerancePolicy& tol) {
    if (cfg.quasilinear) return *cfg.quasilinear;
    if (const auto p = plant_with(cfg, tol)) return build_quasilinear(*p);
    if (cfg.classical) return cfg.classical->sde.to_quasilinear();
    throw ConfigError("config describes no system (plant, quasilinear or classical)");
}

std::vector<double> time_grid(const RunConfig& run) {
    std::vector<double> grid(run.t_points);
    const double last = static_cast<double>(run.t_points - 1);
    for (std::size_t i = 0; i < run.t_points; ++i) grid[i] = run.t_final * static_cast<double>(i) / last;
    grid.back() = run.t_final;
    return grid;
}

Eigen::VectorXcd initial_moments(const Config& cfg, const QuasilinearSystem& sys, const MomentIndexSpace& space,
                                 const TolerancePolicy& tol) {
    if (!cfg.initial_state) throw ConfigError("moments: config has no initial_state");
    const InitialStateConfig& st = *cfg.initial_state;
    if (st.gaussian) return gaussian_initial_moments(*st.gaussian, sys.theta, space, tol.psd);
    std::map<std::string, std::size_t> by_label;
    for (std::size_t i = 0; i < space.size(); ++i) by_label.emplace(space.label(i), i);
    Eigen::VectorXcd mu = Eigen::VectorXcd::Constant(static_cast<Eigen::Index>(space.size()), Complex(NAN, NAN));
    mu(0) = 1.0;
    for (const auto& [label, value] : st.moments) {
        const auto it = by_label.find(label);
        if (it == by_label.end()) {
            throw ConfigError("initial_state.moments: '" + label + "' is not a stored moment up to r_max");
        }
        if (it->second == 0 && value != Complex(1.0)) throw ConfigError("initial_state.moments: m_0 must be 1");
        mu(static_cast<Eigen::Index>(it->second)) = value;
    }
    for (std::size_t i = 0; i < space.size(); ++i) {
        if (std::isnan(mu(static_cast<Eigen::Index>(i)).real())) {
            throw ConfigError("initial_state.moments: missing " + space.label(i));
        }
    }
    return mu;
}

std::string csv_table(const MomentIndexSpace& space, const MomentTrajectory& traj, bool real_part) {
    std::string out = "t";
    for (std::size_t i = 0; i < space.size(); ++i) out += "," + space.label(i);
    out += '\n';
    for (std::size_t r = 0; r < traj.times.size(); ++r) {
        out += format_double(traj.times[r]);
        for (Eigen::Index i = 0; i < traj.values[r].size(); ++i) {
            const Complex v = traj.values[r](i);
            out += ',';
            out += format_double(real_part ? v.real() : v.imag());
        }
        out += '\n';
    }
    return out;
}

json cmd_check(const Config& cfg, const TolerancePolicy& tol, int& code) {
    if (const auto p = plant_with(cfg, tol)) {
        RealizabilityReport rep = check_realizability(p->coupling, p->theta, p->omega, tol);
        if (rep.passed()) {
            try {
                rep.pr_residual = build_quasilinear(*p).report->pr_residual;
            } catch (const DomainError&) {
            }
        }
        const bool ok = rep.passed() && (!rep.pr_residual || *rep.pr_residual <= tol.pr);
        code = ok ? kOk : kDomainFailure;
        json out = report_json(rep);
        out["passed"] = ok;
        return out;
    }
    if (cfg.quasilinear) {
        const double pr = pr_residual(*cfg.quasilinear);
        code = pr <= tol.pr ? kOk : kDomainFailure;
        return {{"passed", code == kOk}, {"pr_residual", pr}};
    }
    throw ConfigError("check: config has no plant or quasilinear system");
}

json cmd_build(const Config& cfg, const TolerancePolicy& tol) {
    const auto p = plant_with(cfg, tol);
    if (!p) throw ConfigError("build: config has no plant description");
    const QuasilinearSystem sys = build_quasilinear(*p);
    json out = {{"quasilinear", quasilinear_json(sys)},
                {"K", to_json(sys.k_mat)},
                {"pr_residual", pr_residual(sys)},
                {"realizability", report_json(*sys.report)}};
    return out;
}

json cmd_moments(const Config& cfg, const CommandOptions& opt, const TolerancePolicy& tol,
                 std::map<std::string, std::string>& files) {
    const QuasilinearSystem sys = resolve_system(cfg, tol);
    const MomentGenerator gen = build_generator(sys, cfg.run.r_max, MomentIndexSpace::Basis::Reduced, tol.prune);
    const Eigen::VectorXcd mu0 = initial_moments(cfg, sys, gen.space, tol);
    const std::vector<double> grid = time_grid(cfg.run);
    PropagationOptions popt;
    popt.method = cfg.run.method;
    const MomentTrajectory traj = propagate(gen, mu0, grid, popt);

    json labels = json::array();
    for (std::size_t i = 0; i < gen.space.size(); ++i) labels.push_back(gen.space.label(i));
    const Eigen::VectorXcd& last = traj.values.back();
    json out = {{"r_max", cfg.run.r_max},
                {"basis", "reduced"},
                {"method", cfg.run.method == PropagationMethod::RungeKutta45 ? "rk45" : "expm"},
                {"t_final", cfg.run.t_final},
                {"t_points", cfg.run.t_points},
                {"labels", labels},
                {"block_lower_triangular", gen.is_block_lower_triangular()},
                {"final", {{"re", to_json(Eigen::VectorXd(last.real()))}, {"im", to_json(Eigen::VectorXd(last.imag()))}}}};
    if (opt.format == "json") {
        json re = json::array(), im = json::array();
        for (const auto& v : traj.values) {
            re.push_back(to_json(Eigen::VectorXd(v.real())));
            im.push_back(to_json(Eigen::VectorXd(v.imag())));
        }
        out["trajectory"] = {{"times", traj.times}, {"re", re}, {"im", im}};
    } else {
        files["moments_re.csv"] = csv_table(gen.space, traj, true);
        files["moments_im.csv"] = csv_table(gen.space, traj, false);
        out["files"] = {"moments_re.csv", "moments_im.csv"};
    }
    return out;
}

json cmd_stability(const Config& cfg, const TolerancePolicy& tol) {
    const StabilityVerdict v = stability(resolve_system(cfg, tol));
    json spectrum = json::array();
    for (const Complex& z : v.lyap_spectrum) spectrum.push_back({z.real(), z.imag()});
    return {{"a_hurwitz", v.a_hurwitz},
            {"a_spectral_abscissa", v.a_spectral_abscissa},
            {"quadratically_stable", v.quadratically_stable},
            {"spectral_abscissa", v.spectral_abscissa},
            {"lyap_spectrum", spectrum}};
}

json cmd_steady(const Config& cfg, const TolerancePolicy& tol) {
    const SteadyState s = steady_state(resolve_system(cfg, tol));
    return {{"alpha", to_json(s.alpha)}, {"sigma", to_json(s.sigma)}, {"residual", s.residual}};
}

json cmd_oracle(const Config& cfg, const CommandOptions& opt, int& code) {
    if (!cfg.classical) throw ConfigError("oracle: config has no classical block");
    const ClassicalConfig& c = *cfg.classical;
    McOptions mco;
    mco.paths = c.paths;
    mco.dt = c.dt;
    mco.t_final = c.t_final;
    mco.seed = opt.seed;
    mco.r_max = c.r_max;
    const McResult mc = simulate(c.sde, c.x0, mco);
    const ZScoreReport rep = compare(mc, predicted_moments(c.sde, c.x0, c.r_max, c.t_final));
    code = rep.passed ? kOk : kDomainFailure;
    json moments = json::array();
    for (const auto& e : rep.entries) {
        moments.push_back({{"label", e.label},
                           {"empirical", e.empirical},
                           {"predicted", e.predicted},
                           {"std_error", e.std_error},
                           {"z", e.z}});
    }
    return {{"passed", rep.passed},  {"max_abs_z", rep.max_abs_z}, {"threshold", rep.threshold},
            {"paths", mc.paths},     {"steps", mc.steps},          {"dt", mc.dt},
            {"t_final", mc.t_final}, {"moments", moments}};
}

json error_json(const char* type, const std::string& message) { return {{"type", type}, {"message", message}}; }

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

Outcome run(const std::string& command, const Config& config, const CommandOptions& options) {
    Outcome outcome;
    outcome.report = {{"tool", "quasilin"},
                      {"tool_version", kToolVersion},
                      {"command", command},
                      {"config_hash", hex64(config.hash)},
                      {"seed", options.seed}};
    const TolerancePolicy tol = effective_tolerance(config, options);
    int code = kOk;
    try {
        json result;
        if (command == "check") {
            result = cmd_check(config, tol, code);
        } else if (command == "build") {
            result = cmd_build(config, tol);
        } else if (command == "moments") {
            result = cmd_moments(config, options, tol, outcome.files);
        } else if (command == "steady") {
            result = cmd_steady(config, tol);
        } else if (command == "stability") {
            result = cmd_stability(config, tol);
        } else if (command == "oracle") {
            result = cmd_oracle(config, options, code);
        } else {
            throw ConfigError("unknown command '" + command + "'");
        }
        outcome.report["result"] = std::move(result);
        outcome.exit_code = code;
    } catch (const NonAffineDrift& e) {
        json err = error_json("NonAffineDrift", e.what());
        err["residual_norm"] = e.residual_norm();
        outcome.report["error"] = err;
        outcome.exit_code = kDomainFailure;
    } catch (const ComplexDrift& e) {
        json err = error_json("ComplexDrift", e.what());
        err["leakage"] = e.leakage();
        outcome.report["error"] = err;
        outcome.exit_code = kDomainFailure;
    } catch (const SingularCcrError& e) {
        outcome.report["error"] = error_json("SingularCcrError", e.what());
        outcome.exit_code = kDomainFailure;
    } catch (const RealizabilityError& e) {
        outcome.report["error"] = error_json("RealizabilityError", e.what());
        outcome.exit_code = kDomainFailure;
    } catch (const NotPositiveSemidefinite& e) {
        outcome.report["error"] = error_json("NotPositiveSemidefinite", e.what());
        outcome.exit_code = kDomainFailure;
    } catch (const NotStable& e) {
        outcome.report["error"] = error_json("NotStable", e.what());
        outcome.exit_code = kDomainFailure;
    } catch (const IntegrationError& e) {
        outcome.report["error"] = error_json("IntegrationError", e.what());
        outcome.exit_code = kDomainFailure;
    } catch (const DomainError& e) {
        outcome.report["error"] = error_json("DomainError", e.what());
        outcome.exit_code = kDomainFailure;
    } catch (const std::invalid_argument& e) {
        outcome.report["error"] = error_json("InputError", e.what());
        outcome.exit_code = kInputError;
    } catch (const std::out_of_range& e) {
        outcome.report["error"] = error_json("InputError", e.what());
        outcome.exit_code = kInputError;
    } catch (const std::exception& e) {
        outcome.report["error"] = error_json("InternalError", e.what());
        outcome.exit_code = kDomainFailure;
    }
    return outcome;
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& out, std::ostream& err) {
    Outcome outcome;
    try {
        const Config config = load_config(options.config_path);
        outcome = run(command, config, options);
    } catch (const std::exception& e) {
        outcome.exit_code = kInputError;
        outcome.report = {{"tool", "quasilin"},
                          {"tool_version", kToolVersion},
                          {"command", command},
                          {"error", error_json("InputError", e.what())}};
    }
    if (outcome.report.contains("error")) err << "quasilin " << command << ": " << outcome.report["error"]["message"].get<std::string>() << '\n';

    const std::string text = outcome.report.dump(2) + "\n";
    out << text;
    try {
        const std::filesystem::path dir(options.out_dir);
        std::filesystem::create_directories(dir);
        auto write = [&dir](const std::string& name, const std::string& content) {
            std::ofstream f(dir / name, std::ios::binary);
            if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
            f << content;
        };
        write(command + ".json", text);
        for (const auto& [name, content] : outcome.files) write(name, content);
    } catch (const std::exception& e) {
        err << "quasilin " << command << ": " << e.what() << '\n';
        return kInputError;
    }
    return outcome.exit_code;
}

}  // namespace quasilin::cli
