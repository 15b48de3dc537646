#include "quasilin/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace quasilin::cli {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ConfigError(where + ": missing required key '" + key + "'");
    return *it;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
}

std::size_t count(const json& v, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(where + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

Eigen::VectorXd vector(const json& v, std::size_t n, const std::string& where) {
    if (!v.is_array() || v.size() != n) {
        throw ConfigError(where + ": expected an array of length " + std::to_string(n));
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], where);
    return out;
}

// Matrices are lists of rows.
Eigen::MatrixXd matrix(const json& v, std::size_t rows, std::size_t cols, const std::string& where) {
    const std::string shape = std::to_string(rows) + "x" + std::to_string(cols);
    if (!v.is_array() || v.size() != rows) throw ConfigError(where + ": expected a " + shape + " matrix");
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != cols) throw ConfigError(where + ": expected a " + shape + " matrix");
        for (std::size_t j = 0; j < cols; ++j) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = number(v[i][j], where);
        }
    }
    return out;
}

std::vector<Eigen::MatrixXd> matrix_list(const json& v, std::size_t len, std::size_t rows, std::size_t cols,
                                         const std::string& where) {
    if (!v.is_array() || v.size() != len) {
        throw ConfigError(where + ": expected a list of " + std::to_string(len) + " matrices");
    }
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(matrix(v[i], rows, cols, where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

TolerancePolicy parse_tolerance(const json& v, TolerancePolicy tol) {
    check_keys(v, {"prune", "residual", "hermitian", "psd", "imag_leak", "singular_det", "pr"}, "run.tolerance");
    auto set = [&](const char* key, double& field) {
        if (v.contains(key)) {
            field = number(v[key], std::string("run.tolerance.") + key);
            if (!(field >= 0.0)) throw ConfigError(std::string("run.tolerance.") + key + ": must be non-negative");
        }
    };
    set("prune", tol.prune);
    set("residual", tol.residual);
    set("hermitian", tol.hermitian);
    set("psd", tol.psd);
    set("imag_leak", tol.imag_leak);
    set("singular_det", tol.singular_det);
    set("pr", tol.pr);
    return tol;
}

RunConfig parse_run(const json& v, TolerancePolicy& tol) {
    check_keys(v, {"r_max", "t_final", "t_points", "method", "tolerance"}, "run");
    RunConfig run;
    if (v.contains("r_max")) run.r_max = count(v["r_max"], "run.r_max");
    if (v.contains("t_final")) run.t_final = number(v["t_final"], "run.t_final");
    if (v.contains("t_points")) run.t_points = count(v["t_points"], "run.t_points");
    if (v.contains("method")) {
        const json& m = v["method"];
        if (m == "rk45") {
            run.method = PropagationMethod::RungeKutta45;
        } else if (m == "expm") {
            run.method = PropagationMethod::MatrixExponential;
        } else {
            throw ConfigError("run.method: expected \"rk45\" or \"expm\"");
        }
    }
    if (v.contains("tolerance")) tol = parse_tolerance(v["tolerance"], tol);
    if (run.r_max > kMaxDegree) throw ConfigError("run.r_max: at most 12");
    if (!(run.t_final > 0.0)) throw ConfigError("run.t_final: must be positive");
    if (run.t_points < 2) throw ConfigError("run.t_points: at least 2");
    return run;
}

Eigen::MatrixXd require_antisymmetric(const Eigen::MatrixXd& t, const std::string& where) {
    if (t != -t.transpose()) throw ConfigError(where + ": must be antisymmetric");
    return t;
}

QuasilinearSystem parse_quasilinear(const json& v, std::size_t n, std::size_t m) {
    check_keys(v, {"A", "beta", "B", "lin_disp", "theta", "V", "J"}, "quasilinear");
    QuasilinearSystem sys;
    sys.a_mat = matrix(require(v, "A", "quasilinear"), n, n, "quasilinear.A");
    sys.beta = vector(require(v, "beta", "quasilinear"), n, "quasilinear.beta");
    sys.b_mat = matrix(require(v, "B", "quasilinear"), n, m, "quasilinear.B");
    sys.lin_disp = v.contains("lin_disp") ? matrix_list(v["lin_disp"], m, n, n, "quasilinear.lin_disp")
                                          : std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Zero(
                                                                                static_cast<Eigen::Index>(n),
                                                                                static_cast<Eigen::Index>(n)));
    sys.theta = require_antisymmetric(matrix(require(v, "theta", "quasilinear"), n, n, "quasilinear.theta"),
                                        "quasilinear.theta");
    sys.v_mat = matrix(require(v, "V", "quasilinear"), m, m, "quasilinear.V");
    sys.j_mat = require_antisymmetric(matrix(require(v, "J", "quasilinear"), m, m, "quasilinear.J"),
                                        "quasilinear.J");
    if (sys.v_mat != sys.v_mat.transpose()) throw ConfigError("quasilinear.V: must be symmetric");
    return sys;
}

ClassicalConfig parse_classical(const json& v, std::size_t n) {
    check_keys(v, {"A", "beta", "b0", "B", "V", "x0", "paths", "dt", "t_final", "r_max"}, "classical");
    const json& vj = require(v, "V", "classical");
    if (!vj.is_array() || vj.empty()) throw ConfigError("classical.V: expected a non-empty square matrix");
    const std::size_t m = vj.size();
    ClassicalConfig c;
    c.sde.a_mat = matrix(require(v, "A", "classical"), n, n, "classical.A");
    c.sde.beta = v.contains("beta") ? vector(v["beta"], n, "classical.beta")
                                    : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    c.sde.const_disp = v.contains("b0") ? matrix(v["b0"], n, m, "classical.b0")
                                        : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                                static_cast<Eigen::Index>(m));
    c.sde.lin_disp = v.contains("B") ? matrix_list(v["B"], m, n, n, "classical.B")
                                     : std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Zero(
                                                                           static_cast<Eigen::Index>(n),
                                                                           static_cast<Eigen::Index>(n)));
    c.sde.noise_cov = matrix(vj, m, m, "classical.V");
    if (c.sde.noise_cov != c.sde.noise_cov.transpose()) throw ConfigError("classical.V: must be symmetric");
    c.x0.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    c.x0.cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    if (v.contains("x0")) {
        const json& x0 = v["x0"];
        check_keys(x0, {"mean", "cov"}, "classical.x0");
        if (x0.contains("mean")) c.x0.mean = vector(x0["mean"], n, "classical.x0.mean");
        if (x0.contains("cov")) c.x0.cov = matrix(x0["cov"], n, n, "classical.x0.cov");
        if (c.x0.cov != c.x0.cov.transpose()) throw ConfigError("classical.x0.cov: must be symmetric");
    }
    if (v.contains("paths")) c.paths = count(v["paths"], "classical.paths");
    if (v.contains("dt")) c.dt = number(v["dt"], "classical.dt");
    if (v.contains("t_final")) c.t_final = number(v["t_final"], "classical.t_final");
    if (v.contains("r_max")) c.r_max = count(v["r_max"], "classical.r_max");
    if (c.paths < 1000) throw ConfigError("classical.paths: at least 1000");
    if (!(c.t_final > 0.0) || !(c.dt > 0.0) || c.dt > 1e-2 * c.t_final) {
        throw ConfigError("classical: need t_final > 0 and 0 < dt <= t_final / 100");
    }
    if (c.r_max > kMaxDegree) throw ConfigError("classical.r_max: at most 12");
    return c;
}

InitialStateConfig parse_initial_state(const json& v, std::size_t n) {
    check_keys(v, {"alpha", "sigma", "moments"}, "initial_state");
    InitialStateConfig out;
    if (v.contains("moments")) {
        if (v.contains("alpha") || v.contains("sigma")) {
            throw ConfigError("initial_state: give either {alpha, sigma} or {moments}, not both");
        }
        const json& mom = v["moments"];
        if (!mom.is_object()) throw ConfigError("initial_state.moments: expected an object");
        for (const auto& [label, value] : mom.items()) {
            const std::string where = "initial_state.moments." + label;
            if (!value.is_array() || value.size() != 2) throw ConfigError(where + ": expected [re, im]");
            out.moments.emplace(label, Complex(number(value[0], where), number(value[1], where)));
        }
        return out;
    }
    GaussianState g;
    g.alpha = v.contains("alpha") ? vector(v["alpha"], n, "initial_state.alpha")
                                  : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    g.sigma = matrix(require(v, "sigma", "initial_state"), n, n, "initial_state.sigma");
    if (g.sigma != g.sigma.transpose()) throw ConfigError("initial_state.sigma: must be symmetric");
    out.gaussian = std::move(g);
    return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Config parse_config(const json& doc) {
    check_keys(doc,
               {"n", "m", "theta", "omega", "M", "R", "gamma", "R0", "quasilinear", "classical", "initial_state", "run"},
               "config");
    Config cfg;
    cfg.hash = fnv1a64(doc.dump());
    cfg.n = count(require(doc, "n", "config"), "n");
    if (cfg.n == 0 || cfg.n > kMaxObservables) throw ConfigError("n: must be between 1 and 255");
    const std::size_t n = cfg.n;
    if (doc.contains("m")) {
        cfg.m = count(doc["m"], "m");
        if (*cfg.m == 0) throw ConfigError("m: must be positive");
    }
    if (doc.contains("run")) cfg.run = parse_run(doc["run"], cfg.tolerance);

    const bool has_plant = doc.contains("theta") || doc.contains("omega") || doc.contains("M") ||
                           doc.contains("R") || doc.contains("gamma") || doc.contains("R0");
    if (has_plant && doc.contains("quasilinear")) {
        throw ConfigError("config: describe either a plant (theta, omega, M, R, ...) or a quasilinear system");
    }
    if ((has_plant || doc.contains("quasilinear")) && !cfg.m) {
        throw ConfigError("config: missing required key 'm'");
    }

    try {
        if (has_plant) {
            const std::size_t m = *cfg.m;
            const Eigen::MatrixXd theta =
                require_antisymmetric(matrix(require(doc, "theta", "config"), n, n, "theta"), "theta");
            const json& om = require(doc, "omega", "config");
            std::optional<ItoMatrix> omega;
            if (om.is_string()) {
                if (om != "vacuum") throw ConfigError("omega: expected \"vacuum\" or {re, im}");
                omega.emplace(vacuum_ito(m));
            } else {
                check_keys(om, {"re", "im"}, "omega");
                const Eigen::MatrixXd re = matrix(require(om, "re", "omega"), m, m, "omega.re");
                const Eigen::MatrixXd im = om.contains("im") ? matrix(om["im"], m, m, "omega.im")
                                                             : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                                                     static_cast<Eigen::Index>(m));
                Eigen::MatrixXcd w = re.cast<Complex>() + Complex(0.0, 1.0) * im.cast<Complex>();
                omega.emplace(std::move(w), cfg.tolerance);
            }
            CouplingParams cp;
            cp.m_mat = matrix(require(doc, "M", "config"), m, n, "M");
            cp.r_list = doc.contains("R") ? matrix_list(doc["R"], m, n, n, "R")
                                          : std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Zero(
                                                                                static_cast<Eigen::Index>(n),
                                                                                static_cast<Eigen::Index>(n)));
            HamiltonianParams hp;
            hp.gamma = doc.contains("gamma") ? vector(doc["gamma"], n, "gamma")
                                             : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            hp.r0 = doc.contains("R0") ? matrix(doc["R0"], n, n, "R0")
                                       : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                               static_cast<Eigen::Index>(n));
            SystemParams params{CcrMatrix(theta), std::move(*omega), std::move(cp), std::move(hp), cfg.tolerance};
            params.validate();
            cfg.plant = std::move(params);
        }
        if (doc.contains("quasilinear")) {
            QuasilinearSystem sys = parse_quasilinear(doc["quasilinear"], n, *cfg.m);
            sys.validate();
            cfg.quasilinear = std::move(sys);
        }
        if (doc.contains("classical")) {
            ClassicalConfig c = parse_classical(doc["classical"], n);
            c.sde.validate();
            cfg.classical = std::move(c);
        }
        if (doc.contains("initial_state")) cfg.initial_state = parse_initial_state(doc["initial_state"], n);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    } catch (const std::out_of_range& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

}  // namespace quasilin::cli
