#include "quasilin/moment_dynamics.hpp"

#include "quasilin/errors.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace quasilin {

namespace {

inline Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

void enumerate_words(std::size_t n, std::size_t degree, bool non_decreasing, std::vector<std::size_t>& prefix,
                     std::vector<Monomial>& out) {
    if (prefix.size() == degree) {
        out.emplace_back(std::span<const std::size_t>(prefix));
        return;
    }
    const std::size_t start = (non_decreasing && !prefix.empty()) ? prefix.back() : 0;
    for (std::size_t k = start; k < n; ++k) {
        prefix.push_back(k);
        enumerate_words(n, degree, non_decreasing, prefix, out);
        prefix.pop_back();
    }
}

Complex wick_moment(const Monomial& w, const Eigen::VectorXd& alpha, const Eigen::MatrixXcd& s,
                    std::map<Monomial, Complex>& memo) {
    if (w.empty()) return 1.0;
    if (const auto it = memo.find(w); it != memo.end()) return it->second;
    const std::size_t first = w[0];
    const Monomial rest = w.slice(1, w.degree());
    Complex out = alpha(ix(first)) * wick_moment(rest, alpha, s, memo);
    for (std::size_t j = 0; j < rest.degree(); ++j) {
        out += s(ix(first), ix(rest[j])) * wick_moment(rest.without(j), alpha, s, memo);
    }
    memo.emplace(w, out);
    return out;
}

void require_realizable(const QuasilinearSystem& sys, const char* where) {
    if (sys.report && !sys.report->passed()) {
        throw RealizabilityError(std::string(where) + ": system does not preserve the CCRs");
    }
}

}  // namespace

// ---------------------------------------------------------- index space

MomentIndexSpace::MomentIndexSpace(std::size_t n, std::size_t r_max, Basis basis)
    : n_(n), r_max_(r_max), basis_(basis) {
    if (n == 0 || n > kMaxObservables) throw std::invalid_argument("MomentIndexSpace: bad number of observables");
    if (r_max > kMaxDegree) throw std::invalid_argument("MomentIndexSpace: r_max exceeds the supported maximum of 12");
    std::vector<std::size_t> prefix;
    for (std::size_t d = 0; d <= r_max; ++d) {
        offsets_.push_back(indices_.size());
        enumerate_words(n, d, basis == Basis::Reduced, prefix, indices_);
    }
    offsets_.push_back(indices_.size());
    for (std::size_t i = 0; i < indices_.size(); ++i) lookup_.emplace(indices_[i], i);
}

std::optional<std::size_t> MomentIndexSpace::find(const Monomial& m) const {
    const auto it = lookup_.find(m);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t MomentIndexSpace::position(const Monomial& m) const {
    const auto pos = find(m);
    if (!pos) throw std::out_of_range("MomentIndexSpace: index " + m.to_string() + " not in space");
    return *pos;
}

std::string MomentIndexSpace::label(std::size_t pos) const { return label(index(pos), n_); }

std::string MomentIndexSpace::label(const Monomial& m, std::size_t n) {
    if (m.empty()) return "m_0";
    std::string out = "m_";
    for (std::size_t i = 0; i < m.degree(); ++i) {
        if (n > 9 && i > 0) out += '_';
        out += std::to_string(m[i] + 1);
    }
    return out;
}

bool MomentGenerator::is_block_lower_triangular(double tol) const {
    for (std::size_t row = 0; row < space.size(); ++row) {
        const std::size_t d = space.index(row).degree();
        const std::size_t first_higher = space.degree_offset(std::min(d + 1, space.r_max() + 1));
        for (std::size_t col = first_higher; col < space.size(); ++col) {
            if (std::abs(psi(ix(row), ix(col))) > tol) return false;
        }
    }
    // d/dt of the identity moment vanishes.
    return psi.row(0).cwiseAbs().maxCoeff() <= tol;
}

// ------------------------------------------------------------- generator

MomentGenerator build_generator(const QuasilinearSystem& sys, std::size_t r_max, MomentIndexSpace::Basis basis,
                                double prune_tolerance) {
    sys.validate();
    require_realizable(sys, "build_generator");
    const std::size_t n = sys.dimension();
    const std::size_t m = sys.channels();
    const WeylAlgebra algebra(CcrMatrix(sys.theta), prune_tolerance);
    const Eigen::MatrixXcd omega = sys.omega();

    std::vector<WeylPoly> f;
    std::vector<std::vector<WeylPoly>> g(n);        // g[p][s]
    std::vector<std::vector<WeylPoly>> g_omega(n);  // sum_u omega_su g[p][u]
    for (std::size_t p = 0; p < n; ++p) {
        f.push_back(algebra.constant(sys.beta(ix(p))) +
                    linear_form(algebra, sys.a_mat.row(ix(p)).transpose().cast<Complex>()));
        for (std::size_t s = 0; s < m; ++s) {
            g[p].push_back(algebra.constant(sys.b_mat(ix(p), ix(s))) +
                           linear_form(algebra, sys.lin_disp[s].row(ix(p)).transpose().cast<Complex>()));
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t s = 0; s < m; ++s) {
            WeylPoly acc = algebra.zero();
            for (std::size_t u = 0; u < m; ++u) {
                const Complex w = omega(ix(s), ix(u));
                if (w != Complex{}) acc += g[p][u] * w;
            }
            g_omega[p].push_back(std::move(acc));
        }
    }

    MomentGenerator gen{MomentIndexSpace(n, r_max, basis), Eigen::MatrixXcd()};
    const std::size_t size = gen.space.size();
    gen.psi = Eigen::MatrixXcd::Zero(ix(size), ix(size));

    auto sub = [&](const Monomial& k, std::size_t b, std::size_t e) {
        const std::vector<std::size_t> w = k.slice(b, e).indices();
        return algebra.word(w);
    };

    for (std::size_t row = 0; row < size; ++row) {
        const Monomial& k = gen.space.index(row);
        const std::size_t r = k.degree();
        if (r == 0) continue;
        WeylPoly expr = algebra.zero();
        for (std::size_t j = 0; j < r; ++j) {
            expr += sub(k, 0, j) * f[k[j]] * sub(k, j + 1, r);
        }
        for (std::size_t j = 0; j < r; ++j) {
            const WeylPoly left = sub(k, 0, j);
            for (std::size_t l = j + 1; l < r; ++l) {
                const WeylPoly mid = sub(k, j + 1, l);
                const WeylPoly right = sub(k, l + 1, r);
                for (std::size_t s = 0; s < m; ++s) {
                    if (g[k[j]][s].is_zero() || g_omega[k[l]][s].is_zero()) continue;
                    expr += left * g[k[j]][s] * mid * g_omega[k[l]][s] * right;
                }
            }
        }
        for (const auto& [mono, c] : expr.terms()) {
            const auto col = gen.space.find(mono);
            if (!col) {
                throw std::logic_error("build_generator: moment equation couples to degree " +
                                       std::to_string(mono.degree()) + " beyond r_max");
            }
            gen.psi(ix(row), ix(*col)) += c;
        }
    }
    return gen;
}

// ------------------------------------------------------- initial moments

Eigen::VectorXcd gaussian_initial_moments(const GaussianState& state, const Eigen::MatrixXd& theta,
                                          const MomentIndexSpace& space, double psd_tol) {
    const auto n = ix(space.dimension());
    if (state.alpha.size() != n || state.sigma.rows() != n || state.sigma.cols() != n || theta.rows() != n ||
        theta.cols() != n) {
        throw std::invalid_argument("gaussian_initial_moments: shapes do not match the index space");
    }
    if ((state.sigma - state.sigma.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * std::max(1.0, state.sigma.cwiseAbs().maxCoeff())) {
        throw std::invalid_argument("gaussian_initial_moments: sigma must be symmetric");
    }
    const Eigen::MatrixXcd s = state.sigma.cast<Complex>() + Complex(0.0, 0.5) * theta.cast<Complex>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(s, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -psd_tol) {
        throw NotPositiveSemidefinite("gaussian_initial_moments: Sigma + i Theta/2 is not positive semi-definite");
    }
    std::map<Monomial, Complex> memo;
    Eigen::VectorXcd mu(ix(space.size()));
    for (std::size_t i = 0; i < space.size(); ++i) {
        mu(ix(i)) = wick_moment(space.index(i), state.alpha, s, memo);
    }
    return mu;
}

Eigen::VectorXcd expand_to_full(const Eigen::VectorXcd& reduced, const MomentIndexSpace& reduced_space,
                                const Eigen::MatrixXd& theta, double prune_tolerance) {
    if (reduced_space.basis() != MomentIndexSpace::Basis::Reduced ||
        static_cast<std::size_t>(reduced.size()) != reduced_space.size()) {
        throw std::invalid_argument("expand_to_full: expected a reduced moment vector");
    }
    const WeylAlgebra algebra{CcrMatrix(theta), prune_tolerance};
    const MomentIndexSpace full(reduced_space.dimension(), reduced_space.r_max(), MomentIndexSpace::Basis::Full);
    Eigen::VectorXcd out(ix(full.size()));
    for (std::size_t i = 0; i < full.size(); ++i) {
        const WeylPoly p = algebra.word(full.index(i).indices());
        Complex acc{};
        for (const auto& [mono, c] : p.terms()) acc += c * reduced(ix(reduced_space.position(mono)));
        out(ix(i)) = acc;
    }
    return out;
}

// ------------------------------------------------------------ propagation

MomentTrajectory propagate(const MomentGenerator& gen, const Eigen::VectorXcd& mu0, std::span<const double> t_grid,
                           const PropagationOptions& options) {
    if (static_cast<std::size_t>(mu0.size()) != gen.space.size()) {
        throw std::invalid_argument("propagate: initial moment vector has wrong length");
    }
    if (t_grid.empty() || t_grid.front() != 0.0) throw std::invalid_argument("propagate: time grid must start at 0");
    MomentTrajectory traj;
    traj.times.assign(t_grid.begin(), t_grid.end());
    traj.values.reserve(t_grid.size());

    if (options.method == PropagationMethod::MatrixExponential) {
        for (std::size_t i = 1; i < t_grid.size(); ++i) {
            if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("propagate: time grid must increase");
        }
        Eigen::VectorXcd mu = mu0;
        traj.values.push_back(mu);
        double cached_dt = -1.0;
        Eigen::MatrixXcd step;
        for (std::size_t i = 1; i < t_grid.size(); ++i) {
            const double dt = t_grid[i] - t_grid[i - 1];
            if (dt != cached_dt) {
                step = (gen.psi * Complex(dt)).exp();
                cached_dt = dt;
            }
            mu = step * mu;
            traj.values.push_back(mu);
        }
        return traj;
    }

    integrate_dopri5(
        [&gen](double, const Eigen::VectorXcd& y) -> Eigen::VectorXcd { return gen.psi * y; }, Eigen::VectorXcd(mu0),
        t_grid, options.ode,
        [&traj](std::size_t, double, const Eigen::VectorXcd& y) { traj.values.push_back(y); });
    return traj;
}

// ----------------------------------------------------- mean / covariance

MeanCovRates mean_cov_rates(const QuasilinearSystem& sys, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& sigma) {
    const Eigen::MatrixXd& a = sys.a_mat;
    MeanCovRates out;
    out.alpha_dot = a * alpha + sys.beta;
    out.sigma_dot = a * sigma + sigma * a.transpose() - system_v(sys, sigma) +
                    sys.b_mat * sys.v_mat * sys.b_mat.transpose() + system_r_theta(sys) / 4.0 - system_e(sys, alpha) -
                    system_v(sys, alpha * alpha.transpose());
    return out;
}

Eigen::MatrixXcd second_moment_rate(const QuasilinearSystem& sys, const Eigen::VectorXd& alpha,
                                    const Eigen::MatrixXcd& pi) {
    const Eigen::MatrixXcd a = sys.a_mat.cast<Complex>();
    const Eigen::MatrixXcd v_pi =
        system_v(sys, pi.real()).cast<Complex>() + Complex(0.0, 1.0) * system_v(sys, pi.imag()).cast<Complex>();
    const Eigen::MatrixXd real_part = sys.beta * alpha.transpose() + alpha * sys.beta.transpose() +
                                      sys.b_mat * sys.v_mat * sys.b_mat.transpose() + system_r_theta(sys) / 4.0 -
                                      system_e(sys, alpha);
    return a * pi + pi * a.transpose() + real_part.cast<Complex>() - v_pi +
           Complex(0.0, 0.5) * (sys.b_mat * sys.j_mat * sys.b_mat.transpose()).cast<Complex>();
}

MeanCovTrajectory mean_cov_ode(const QuasilinearSystem& sys, const GaussianState& state0,
                               std::span<const double> t_grid, const OdeOptions& options) {
    sys.validate();
    require_realizable(sys, "mean_cov_ode");
    const auto n = ix(sys.dimension());
    if (state0.alpha.size() != n || state0.sigma.rows() != n || state0.sigma.cols() != n) {
        throw std::invalid_argument("mean_cov_ode: initial state has wrong shape");
    }
    Eigen::VectorXd y(n + n * n);
    y.head(n) = state0.alpha;
    y.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(state0.sigma.data(), n * n);

    MeanCovTrajectory traj;
    auto rhs = [&sys, n](double, const Eigen::VectorXd& s) -> Eigen::VectorXd {
        const Eigen::VectorXd alpha = s.head(n);
        const Eigen::MatrixXd sigma = Eigen::Map<const Eigen::MatrixXd>(s.data() + n, n, n);
        const MeanCovRates rates = mean_cov_rates(sys, alpha, sigma);
        Eigen::VectorXd out(s.size());
        out.head(n) = rates.alpha_dot;
        out.tail(n * n) = Eigen::Map<const Eigen::VectorXd>(rates.sigma_dot.data(), n * n);
        return out;
    };
    auto symmetrize = [n](Eigen::VectorXd& s) {
        Eigen::Map<Eigen::MatrixXd> sigma(s.data() + n, n, n);
        const Eigen::MatrixXd sym = (sigma + sigma.transpose()) / 2.0;
        sigma = sym;
    };
    auto observe = [&traj, n](std::size_t, double t, const Eigen::VectorXd& s) {
        traj.times.push_back(t);
        traj.alpha.push_back(s.head(n));
        traj.sigma.push_back(Eigen::Map<const Eigen::MatrixXd>(s.data() + n, n, n));
    };
    integrate_dopri5(rhs, std::move(y), t_grid, options, observe, symmetrize);
    return traj;
}

// -------------------------------------------------------------- stability

Eigen::VectorXd sym_to_coords(const Eigen::MatrixXd& s) {
    const Eigen::Index n = s.rows();
    Eigen::VectorXd c(n * (n + 1) / 2);
    Eigen::Index q = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) c(q++) = s(i, j);
    }
    return c;
}

Eigen::MatrixXd coords_to_sym(const Eigen::VectorXd& c, std::size_t n) {
    const auto sz = ix(n);
    if (c.size() != sz * (sz + 1) / 2) throw std::invalid_argument("coords_to_sym: wrong coordinate count");
    Eigen::MatrixXd s(sz, sz);
    Eigen::Index q = 0;
    for (Eigen::Index i = 0; i < sz; ++i) {
        for (Eigen::Index j = i; j < sz; ++j, ++q) {
            s(i, j) = c(q);
            s(j, i) = c(q);
        }
    }
    return s;
}

Eigen::MatrixXd lyapunov_lift(const QuasilinearSystem& sys) {
    const std::size_t n = sys.dimension();
    const auto dim = ix(n * (n + 1) / 2);
    Eigen::MatrixXd lift(dim, dim);
    Eigen::Index col = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j, ++col) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ix(n), ix(n));
            t(ix(i), ix(j)) = 1.0;
            t(ix(j), ix(i)) = 1.0;
            const Eigen::MatrixXd image = sys.a_mat * t + t * sys.a_mat.transpose() - system_v(sys, t);
            lift.col(col) = sym_to_coords(image);
        }
    }
    return lift;
}

StabilityVerdict stability(const QuasilinearSystem& sys) {
    sys.validate();
    StabilityVerdict verdict;
    const Eigen::VectorXcd a_eigs = sys.a_mat.eigenvalues();
    verdict.a_spectral_abscissa = a_eigs.real().maxCoeff();
    verdict.a_hurwitz = verdict.a_spectral_abscissa < 0.0;

    const Eigen::VectorXcd lift_eigs = lyapunov_lift(sys).eigenvalues();
    verdict.lyap_spectrum.assign(lift_eigs.data(), lift_eigs.data() + lift_eigs.size());
    std::sort(verdict.lyap_spectrum.begin(), verdict.lyap_spectrum.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    verdict.spectral_abscissa = lift_eigs.real().maxCoeff();
    verdict.quadratically_stable = verdict.spectral_abscissa < 0.0;
    return verdict;
}

SteadyState steady_state(const QuasilinearSystem& sys) {
    const StabilityVerdict verdict = stability(sys);
    if (!verdict.quadratically_stable) {
        throw NotStable("steady_state: Sigma -> A Sigma + Sigma A^T - V(Sigma) has spectral abscissa " +
                        std::to_string(verdict.spectral_abscissa) + " >= 0");
    }
    if (!verdict.a_hurwitz) {
        throw NotStable("steady_state: A is not Hurwitz");
    }
    const std::size_t n = sys.dimension();
    SteadyState out;
    out.alpha = -sys.a_mat.partialPivLu().solve(sys.beta);
    out.alpha = (out.alpha.array() + 0.0).matrix();  // no negative zeros in reports
    const Eigen::MatrixXd forcing = sys.b_mat * sys.v_mat * sys.b_mat.transpose() + system_r_theta(sys) / 4.0 -
                                    system_e(sys, out.alpha) - system_v(sys, out.alpha * out.alpha.transpose());
    const auto lu = lyapunov_lift(sys).fullPivLu();
    if (!lu.isInvertible()) throw std::logic_error("steady_state: stable lift reported singular");
    out.sigma = coords_to_sym(lu.solve(-sym_to_coords(forcing)), n);
    out.residual = (sys.a_mat * out.sigma + out.sigma * sys.a_mat.transpose() - system_v(sys, out.sigma) + forcing).norm();
    return out;
}

}  // namespace quasilin
