#include "quasilin/system_model.hpp"

#include "quasilin/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace quasilin {

namespace {

inline Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

void require_shape(const Eigen::MatrixXd& m, std::size_t rows, std::size_t cols, const char* what) {
    if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
        std::ostringstream os;
        os << what << ": expected " << rows << "x" << cols << ", got " << m.rows() << "x" << m.cols();
        throw std::invalid_argument(os.str());
    }
}

void require_symmetric(const Eigen::MatrixXd& m, const char* what) {
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        for (Eigen::Index b = a + 1; b < m.cols(); ++b) {
            if (m(a, b) != m(b, a)) {
                throw std::invalid_argument(std::string(what) + " must be symmetric");
            }
        }
    }
}

// Symmetric basis of S_n: E_ii and E_ij + E_ji (i < j).
std::vector<Eigen::MatrixXd> symmetric_basis(std::size_t n) {
    std::vector<Eigen::MatrixXd> basis;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(ix(n), ix(n));
            t(ix(i), ix(j)) = 1.0;
            t(ix(j), ix(i)) = 1.0;
            basis.push_back(std::move(t));
        }
    }
    return basis;
}

// Theta sum_jk W_jk (M_j^T u^T R_k + R_j u M_k) Theta
Eigen::MatrixXd weighted_m(const Eigen::VectorXd& u, const CouplingParams& cp, const CcrMatrix& theta,
                           const Eigen::MatrixXd& w) {
    const std::size_t n = theta.dimension();
    const std::size_t m = cp.channels();
    require_shape(w, m, m, "weight matrix");
    if (static_cast<std::size_t>(u.size()) != n) throw std::invalid_argument("op_m/op_e: u has wrong length");
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(ix(n), ix(n));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
            const double wjk = w(ix(j), ix(k));
            if (wjk == 0.0) continue;
            inner += wjk * (cp.m_mat.row(ix(j)).transpose() * (u.transpose() * cp.r_list[k]) +
                            (cp.r_list[j] * u) * cp.m_mat.row(ix(k)));
        }
    }
    return theta.matrix() * inner * theta.matrix();
}

// Theta sum_jk W_jk R_j T R_k Theta
Eigen::MatrixXd weighted_r(const Eigen::MatrixXd& t, const CouplingParams& cp, const CcrMatrix& theta,
                           const Eigen::MatrixXd& w) {
    const std::size_t n = theta.dimension();
    const std::size_t m = cp.channels();
    require_shape(w, m, m, "weight matrix");
    require_shape(t, n, n, "op_r/op_v argument");
    Eigen::MatrixXd inner = Eigen::MatrixXd::Zero(ix(n), ix(n));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
            const double wjk = w(ix(j), ix(k));
            if (wjk == 0.0) continue;
            inner += wjk * cp.r_list[j] * t * cp.r_list[k];
        }
    }
    return theta.matrix() * inner * theta.matrix();
}

bool is_singular(const CcrMatrix& theta, const TolerancePolicy& tol) {
    return std::abs(theta.matrix().fullPivLu().determinant()) < tol.singular_det;
}

// H without the realizability or singularity guards.
WeylPoly make_hamiltonian(const HamiltonianParams& hp, const CouplingParams& cp, const WeylAlgebra& algebra,
                          const Eigen::MatrixXd& j_mat) {
    WeylPoly h = linear_form(algebra, hp.gamma.cast<Complex>());
    h += quadratic_form(algebra, hp.r0.cast<Complex>()) * Complex(0.5);
    if (!cp.is_linear()) {
        h -= delta_polynomial(cp, algebra, j_mat) * Complex(1.0 / 12.0);
    }
    return h;
}

}  // namespace

// ---------------------------------------------------------------- ItoMatrix

ItoMatrix::ItoMatrix(Eigen::MatrixXcd omega, const TolerancePolicy& tol) : omega_(std::move(omega)) {
    if (omega_.rows() < 1 || omega_.rows() != omega_.cols()) {
        throw std::invalid_argument("ItoMatrix: omega must be a non-empty square matrix");
    }
    const double herm = (omega_ - omega_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol.hermitian) {
        throw std::invalid_argument("ItoMatrix: omega is not Hermitian");
    }
    const Eigen::MatrixXcd sym = (omega_ + omega_.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol.psd) {
        throw std::invalid_argument("ItoMatrix: omega is not positive semi-definite");
    }
}

ItoMatrix vacuum_ito(std::size_t m) {
    if (m < 2 || m % 2 != 0) {
        throw std::invalid_argument("vacuum_ito: m must be even and at least 2");
    }
    const Eigen::MatrixXd j = CcrMatrix::canonical(m).matrix();
    Eigen::MatrixXcd omega = Eigen::MatrixXcd::Identity(ix(m), ix(m));
    omega += Complex(0.0, 1.0) * j.cast<Complex>();
    return ItoMatrix(omega / 2.0);
}

// ------------------------------------------------------------- params

bool CouplingParams::is_linear() const {
    return std::all_of(r_list.begin(), r_list.end(), [](const Eigen::MatrixXd& r) { return r.isZero(0.0); });
}

void CouplingParams::validate(std::size_t n) const {
    if (static_cast<std::size_t>(m_mat.cols()) != n) {
        throw std::invalid_argument("CouplingParams: M must have n columns");
    }
    if (r_list.size() != channels()) {
        throw std::invalid_argument("CouplingParams: need one R_j per row of M");
    }
    for (const auto& r : r_list) {
        require_shape(r, n, n, "CouplingParams: R_j");
        require_symmetric(r, "CouplingParams: R_j");
    }
}

void HamiltonianParams::validate(std::size_t n) const {
    if (static_cast<std::size_t>(gamma.size()) != n) {
        throw std::invalid_argument("HamiltonianParams: gamma must have length n");
    }
    require_shape(r0, n, n, "HamiltonianParams: R0");
    require_symmetric(r0, "HamiltonianParams: R0");
}

void SystemParams::validate() const {
    const std::size_t n = theta.dimension();
    coupling.validate(n);
    hamiltonian.validate(n);
    if (omega.channels() != coupling.channels()) {
        throw std::invalid_argument("SystemParams: Omega order must equal the number of coupling channels");
    }
}

Eigen::MatrixXcd QuasilinearSystem::omega() const {
    return v_mat.cast<Complex>() + Complex(0.0, 0.5) * j_mat.cast<Complex>();
}

void QuasilinearSystem::validate() const {
    const std::size_t n = dimension();
    const std::size_t m = channels();
    require_shape(a_mat, n, n, "QuasilinearSystem: A");
    if (static_cast<std::size_t>(beta.size()) != n) throw std::invalid_argument("QuasilinearSystem: beta has wrong length");
    require_shape(b_mat, n, m, "QuasilinearSystem: B");
    if (lin_disp.size() != m) throw std::invalid_argument("QuasilinearSystem: need one linear dispersion matrix per channel");
    for (const auto& l : lin_disp) require_shape(l, n, n, "QuasilinearSystem: linear dispersion");
    require_shape(theta, n, n, "QuasilinearSystem: theta");
    require_shape(v_mat, m, m, "QuasilinearSystem: V");
    require_shape(j_mat, m, m, "QuasilinearSystem: J");
    CcrMatrix check_theta(theta);
    CcrMatrix check_j(j_mat);
    require_symmetric(v_mat, "QuasilinearSystem: V");
}

// ---------------------------------------------------------- polynomials

PolyVector coupling_vector(const CouplingParams& cp, const WeylAlgebra& algebra) {
    const std::size_t n = algebra.dimension();
    cp.validate(n);
    PolyVector h(algebra, cp.channels());
    for (std::size_t j = 0; j < cp.channels(); ++j) {
        h[j] = linear_form(algebra, cp.m_mat.row(ix(j)).transpose().cast<Complex>()) +
               quadratic_form(algebra, cp.r_list[j].cast<Complex>()) * Complex(0.5);
    }
    return h;
}

PolyMatrix dispersion(const CouplingParams& cp, const WeylAlgebra& algebra) {
    const std::size_t n = algebra.dimension();
    cp.validate(n);
    const Eigen::MatrixXd& theta = algebra.ccr().matrix();
    const Eigen::MatrixXd b = theta * cp.m_mat.transpose();
    PolyMatrix g(algebra, n, cp.channels());
    for (std::size_t k = 0; k < cp.channels(); ++k) {
        const Eigen::MatrixXd l = theta * cp.r_list[k];
        for (std::size_t p = 0; p < n; ++p) {
            g(p, k) = algebra.constant(b(ix(p), ix(k))) +
                      linear_form(algebra, l.row(ix(p)).transpose().cast<Complex>());
        }
    }
    return g;
}

PolyMatrix dispersion_from_coupling(const PolyVector& h) {
    const WeylAlgebra& algebra = h.algebra();
    const PolyVector x = generators(algebra);
    PolyMatrix g(algebra, x.size(), h.size());
    for (std::size_t p = 0; p < x.size(); ++p) {
        for (std::size_t k = 0; k < h.size(); ++k) {
            g(p, k) = commutator(x[p], h[k]) * Complex(0.0, -1.0);
        }
    }
    return g;
}

PolyVector gksl_direct(const PolyVector& h, const ItoMatrix& omega) {
    const WeylAlgebra& algebra = h.algebra();
    const std::size_t m = h.size();
    if (omega.channels() != m) throw std::invalid_argument("gksl_direct: Omega order must match h");
    const PolyVector x = generators(algebra);
    PolyVector out(algebra, x.size());
    for (std::size_t p = 0; p < x.size(); ++p) {
        std::vector<WeylPoly> xh;  // [X_p, h_k]
        xh.reserve(m);
        for (std::size_t k = 0; k < m; ++k) xh.push_back(commutator(x[p], h[k]));
        WeylPoly acc = algebra.zero();
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = 0; k < m; ++k) {
                const Complex w = omega.omega()(ix(j), ix(k));
                if (w == Complex{}) continue;
                // [h_j, X_p] = -[X_p, h_j]
                acc += (h[j] * xh[k] - xh[j] * h[k]) * (w * 0.5);
            }
        }
        out[p] = std::move(acc);
    }
    return out;
}

PolyVector gksl_lemma1(const PolyVector& h, const PolyMatrix& g, const ItoMatrix& omega) {
    const WeylAlgebra& algebra = h.algebra();
    const std::size_t m = h.size();
    const std::size_t n = algebra.dimension();
    if (omega.channels() != m || g.cols() != m || g.rows() != n) {
        throw std::invalid_argument("gksl_lemma1: inconsistent shapes");
    }
    const Eigen::MatrixXd j_mat = omega.j();
    PolyVector out(algebra, n);
    for (std::size_t p = 0; p < n; ++p) {
        WeylPoly acc = algebra.zero();
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t k = 0; k < m; ++k) {
                const double jjk = j_mat(ix(j), ix(k));
                if (jjk != 0.0) acc += g(p, j) * h[k] * Complex(jjk);
                const Complex w = omega.omega()(ix(j), ix(k));
                if (w != Complex{}) acc += commutator(h[j], g(p, k)) * (Complex(0.0, 1.0) * w);
            }
        }
        out[p] = acc * Complex(0.5);
    }
    return out;
}

// ---------------------------------------------------------- matrix ops

Eigen::MatrixXd op_m(const Eigen::VectorXd& u, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& j_mat) {
    return weighted_m(u, cp, theta, j_mat);
}

Eigen::MatrixXd op_e(const Eigen::VectorXd& u, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& v_mat) {
    return weighted_m(u, cp, theta, v_mat);
}

Eigen::MatrixXd op_r(const Eigen::MatrixXd& t, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& j_mat) {
    return weighted_r(t, cp, theta, j_mat);
}

Eigen::MatrixXd op_v(const Eigen::MatrixXd& t, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& v_mat) {
    return weighted_r(t, cp, theta, v_mat);
}

std::vector<Eigen::MatrixXd> phi_matrices(const CouplingParams& cp, const Eigen::MatrixXd& j_mat) {
    const std::size_t n = cp.dimension();
    const std::size_t m = cp.channels();
    std::vector<Eigen::MatrixXd> phi(n, Eigen::MatrixXd::Zero(ix(n), ix(n)));
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t s = 0; s < m; ++s) {
                const double jps = j_mat(ix(p), ix(s));
                if (jps == 0.0) continue;
                phi[k] += jps * cp.r_list[p].col(ix(k)) * cp.m_mat.row(ix(s));
            }
        }
    }
    return phi;
}

RealizabilityReport check_realizability(const CouplingParams& cp, const CcrMatrix& theta, const ItoMatrix& omega,
                                        const TolerancePolicy& tol) {
    const std::size_t n = theta.dimension();
    cp.validate(n);
    if (omega.channels() != cp.channels()) {
        throw std::invalid_argument("check_realizability: Omega order must equal the number of channels");
    }
    const Eigen::MatrixXd j_mat = omega.j();
    RealizabilityReport report;

    double m_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m_res = std::max(m_res, max_abs(op_m(Eigen::VectorXd::Unit(ix(n), ix(i)), cp, theta, j_mat)));
    }
    report.m_op_zero = {m_res <= tol.residual, m_res};

    double r_res = 0.0;
    for (const auto& t : symmetric_basis(n)) {
        r_res = std::max(r_res, max_abs(op_r(t, cp, theta, j_mat)));
    }
    report.r_op_zero_sym = {r_res <= tol.residual, r_res};

    Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(ix(n * n), ix(n * n));
    for (std::size_t j = 0; j < cp.channels(); ++j) {
        for (std::size_t k = 0; k < cp.channels(); ++k) {
            const double jjk = j_mat(ix(j), ix(k));
            if (jjk == 0.0) continue;
            const Eigen::MatrixXd lj = theta.matrix() * cp.r_list[j];
            const Eigen::MatrixXd lk = theta.matrix() * cp.r_list[k];
            for (Eigen::Index a = 0; a < lj.rows(); ++a) {
                for (Eigen::Index b = 0; b < lj.cols(); ++b) {
                    kron.block(a * ix(n), b * ix(n), ix(n), ix(n)) += jjk * lj(a, b) * lk;
                }
            }
        }
    }
    report.kron_test_residual = kron.norm();

    if (!is_singular(theta, tol)) {
        for (const auto& phi : phi_matrices(cp, j_mat)) {
            report.phi_symmetry_residuals.push_back(max_abs(phi - phi.transpose()));
        }
    }
    return report;
}

CouplingParams admissible_family(std::size_t n, const AdmissibleFamilyParams& params) {
    if (static_cast<std::size_t>(params.e.size()) != n || static_cast<std::size_t>(params.m1.size()) != n) {
        throw std::invalid_argument("admissible_family: e and M_1 must have length n");
    }
    const double norm = params.e.norm();
    if (norm == 0.0) throw std::invalid_argument("admissible_family: e must be nonzero");
    const Eigen::VectorXd e = params.e / norm;
    CouplingParams cp;
    cp.m_mat.resize(2, ix(n));
    cp.m_mat.row(0) = params.m1;
    cp.m_mat.row(1) = params.c * params.m1 + params.lambda * e.transpose();
    Eigen::MatrixXd r1 = params.r * (e * e.transpose());
    r1 = (r1 + r1.transpose()).eval() / 2.0;  // exact symmetry
    cp.r_list = {r1, params.c * r1};
    return cp;
}

WeylPoly delta_polynomial(const CouplingParams& cp, const WeylAlgebra& algebra, const Eigen::MatrixXd& j_mat) {
    const std::size_t n = algebra.dimension();
    cp.validate(n);
    const Eigen::MatrixXd jm = j_mat * cp.m_mat;  // m x n
    std::vector<RawTerm> raw;
    // X_a Y_ab (JM)_bc X_c with Y_ab = (R_b)_ae X_e
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t e = 0; e < n; ++e) {
            for (std::size_t c = 0; c < n; ++c) {
                double coeff = 0.0;
                for (std::size_t b = 0; b < cp.channels(); ++b) {
                    coeff += cp.r_list[b](ix(a), ix(e)) * jm(ix(b), ix(c));
                }
                if (coeff != 0.0) raw.push_back({{a, e, c}, coeff});
            }
        }
    }
    return algebra.normalize(raw);
}

PolyVector theta_yjm_x(const CouplingParams& cp, const WeylAlgebra& algebra, const Eigen::MatrixXd& j_mat) {
    const std::size_t n = algebra.dimension();
    cp.validate(n);
    const Eigen::MatrixXd& theta = algebra.ccr().matrix();
    const Eigen::MatrixXd jm = j_mat * cp.m_mat;
    PolyVector out(algebra, n);
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<RawTerm> raw;
        // Theta_pa (R_b)_ae (JM)_bc X_e X_c
        for (std::size_t e = 0; e < n; ++e) {
            for (std::size_t c = 0; c < n; ++c) {
                double coeff = 0.0;
                for (std::size_t b = 0; b < cp.channels(); ++b) {
                    coeff += (theta.row(ix(p)) * cp.r_list[b].col(ix(e)))(0, 0) * jm(ix(b), ix(c));
                }
                if (coeff != 0.0) raw.push_back({{e, c}, coeff});
            }
        }
        out[p] = algebra.normalize(raw);
    }
    return out;
}

PolyMatrix gjg_transpose(const PolyMatrix& g, const Eigen::MatrixXd& j_mat) {
    const std::size_t n = g.rows();
    const std::size_t m = g.cols();
    PolyMatrix out(g.algebra(), n, n);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            WeylPoly acc = g.algebra().zero();
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = 0; b < m; ++b) {
                    const double jab = j_mat(ix(a), ix(b));
                    if (jab != 0.0) acc += g(p, a) * g(q, b) * Complex(jab);
                }
            }
            out(p, q) = std::move(acc);
        }
    }
    return out;
}

WeylPoly cubic_hamiltonian(const HamiltonianParams& hp, const CouplingParams& cp, const WeylAlgebra& algebra,
                           const ItoMatrix& omega, const TolerancePolicy& tol) {
    const std::size_t n = algebra.dimension();
    hp.validate(n);
    cp.validate(n);
    if (!cp.is_linear()) {
        if (is_singular(algebra.ccr(), tol)) {
            throw SingularCcrError("cubic_hamiltonian: quadratic coupling requires a nonsingular CCR matrix");
        }
        const RealizabilityReport report = check_realizability(cp, algebra.ccr(), omega, tol);
        if (!report.passed()) {
            std::ostringstream os;
            os << "cubic_hamiltonian: coupling violates CCR preservation (M residual "
               << report.m_op_zero.max_residual << ", R residual " << report.r_op_zero_sym.max_residual << ")";
            throw RealizabilityError(os.str());
        }
    }
    return make_hamiltonian(hp, cp, algebra, omega.j());
}

PolyVector drift(const WeylPoly& hamiltonian, const PolyVector& h, const ItoMatrix& omega) {
    const WeylAlgebra& algebra = hamiltonian.algebra();
    const PolyVector x = generators(algebra);
    PolyVector f = gksl_direct(h, omega);
    for (std::size_t p = 0; p < x.size(); ++p) {
        f[p] += commutator(hamiltonian, x[p]) * Complex(0.0, 1.0);
    }
    return f;
}

QuasilinearSystem build_quasilinear(const SystemParams& params) {
    params.validate();
    const TolerancePolicy& tol = params.tolerance;
    const CouplingParams& cp = params.coupling;
    const std::size_t n = params.dimension();
    const std::size_t m = cp.channels();
    const WeylAlgebra algebra(params.theta, tol.prune);
    const Eigen::MatrixXd j_mat = params.omega.j();

    RealizabilityReport report = check_realizability(cp, params.theta, params.omega, tol);
    if (!cp.is_linear() && is_singular(params.theta, tol)) {
        throw SingularCcrError("build_quasilinear: quadratic coupling requires a nonsingular CCR matrix");
    }

    const WeylPoly hamiltonian = make_hamiltonian(params.hamiltonian, cp, algebra, j_mat);
    const PolyVector f = drift(hamiltonian, coupling_vector(cp, algebra), params.omega);

    QuasilinearSystem sys;
    sys.a_mat.resize(ix(n), ix(n));
    sys.beta.resize(ix(n));
    double nonaffine = 0.0;
    double leak = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        const AffineParts parts = affine_parts(f[p]);
        nonaffine = std::max(nonaffine, parts.residual.max_abs_coefficient());
        leak = std::max({leak, std::abs(parts.constant.imag()), parts.linear.imag().cwiseAbs().maxCoeff()});
        sys.beta(ix(p)) = parts.constant.real();
        sys.a_mat.row(ix(p)) = parts.linear.real().transpose();
    }
    if (nonaffine > tol.residual) {
        std::ostringstream os;
        os << "build_quasilinear: drift has degree >= 2 terms (max coefficient " << nonaffine
           << "); CCR-preservation conditions " << (report.passed() ? "pass" : "fail");
        throw NonAffineDrift(os.str(), nonaffine);
    }
    if (leak > tol.imag_leak) {
        std::ostringstream os;
        os << "build_quasilinear: imaginary parts did not cancel in A or beta (" << leak << ")";
        throw ComplexDrift(os.str(), leak);
    }

    sys.theta = params.theta.matrix();
    sys.v_mat = params.omega.v();
    sys.j_mat = j_mat;
    sys.b_mat = sys.theta * cp.m_mat.transpose();
    sys.lin_disp.reserve(m);
    for (const auto& r : cp.r_list) sys.lin_disp.push_back(sys.theta * r);
    sys.k_mat = sys.b_mat * j_mat * cp.m_mat / 2.0;
    report.pr_residual = pr_residual(sys);
    sys.report = std::move(report);
    return sys;
}

// ------------------------------------------------------- system operators

Eigen::MatrixXd system_v(const QuasilinearSystem& sys, const Eigen::MatrixXd& t) {
    const auto n = ix(sys.dimension());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < sys.channels(); ++j) {
        for (std::size_t k = 0; k < sys.channels(); ++k) {
            const double v = sys.v_mat(ix(j), ix(k));
            if (v != 0.0) out -= v * sys.lin_disp[j] * t * sys.lin_disp[k].transpose();
        }
    }
    return out;
}

Eigen::MatrixXd system_e(const QuasilinearSystem& sys, const Eigen::VectorXd& u) {
    const auto n = ix(sys.dimension());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < sys.channels(); ++j) {
        for (std::size_t k = 0; k < sys.channels(); ++k) {
            const double v = sys.v_mat(ix(j), ix(k));
            if (v == 0.0) continue;
            out -= v * (sys.b_mat.col(ix(j)) * (sys.lin_disp[k] * u).transpose() +
                        (sys.lin_disp[j] * u) * sys.b_mat.col(ix(k)).transpose());
        }
    }
    return out;
}

Eigen::MatrixXd system_r_theta(const QuasilinearSystem& sys) {
    const auto n = ix(sys.dimension());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; j < sys.channels(); ++j) {
        for (std::size_t k = 0; k < sys.channels(); ++k) {
            const double w = sys.j_mat(ix(j), ix(k));
            if (w != 0.0) out -= w * sys.lin_disp[j] * sys.theta * sys.lin_disp[k].transpose();
        }
    }
    return out;
}

double pr_residual(const QuasilinearSystem& sys) {
    const Eigen::MatrixXd lhs = sys.a_mat * sys.theta + sys.theta * sys.a_mat.transpose() +
                                sys.b_mat * sys.j_mat * sys.b_mat.transpose();
    return (lhs - system_v(sys, sys.theta)).norm();
}

// ---------------------------------------------------------------- search

ActiveRThetaSearch search_active_r_theta(const CcrMatrix& theta, const Eigen::MatrixXd& j_mat, std::size_t restarts,
                                         std::uint64_t seed, const TolerancePolicy& tol) {
    const std::size_t n = theta.dimension();
    const std::size_t m = static_cast<std::size_t>(j_mat.rows());
    CcrMatrix j_check(j_mat);
    const std::size_t per = n * (n + 1) / 2;
    const std::size_t dim = m * per;
    const auto basis = symmetric_basis(n);

    auto unpack = [&](const Eigen::VectorXd& p) {
        CouplingParams cp;
        cp.m_mat = Eigen::MatrixXd::Zero(ix(m), ix(n));
        for (std::size_t j = 0; j < m; ++j) {
            Eigen::MatrixXd r = Eigen::MatrixXd::Zero(ix(n), ix(n));
            std::size_t q = j * per;
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = a; b < n; ++b, ++q) {
                    r(ix(a), ix(b)) = p(ix(q));
                    r(ix(b), ix(a)) = p(ix(q));
                }
            }
            cp.r_list.push_back(std::move(r));
        }
        return cp;
    };
    auto residuals = [&](const Eigen::VectorXd& p) {
        const CouplingParams cp = unpack(p);
        Eigen::VectorXd res(ix(basis.size() * n * n + 1));
        Eigen::Index q = 0;
        for (const auto& t : basis) {
            const Eigen::MatrixXd r = op_r(t, cp, theta, j_mat);
            res.segment(q, r.size()) = Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
            q += r.size();
        }
        res(q) = op_r(theta.matrix(), cp, theta, j_mat).squaredNorm() - 1.0;
        return res;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    ActiveRThetaSearch best;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < restarts; ++restart) {
        Eigen::VectorXd p(ix(dim));
        for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = normal(rng);
        double mu = 1e-3;
        Eigen::VectorXd r = residuals(p);
        for (int iter = 0; iter < 200; ++iter) {
            Eigen::MatrixXd jac(r.size(), p.size());
            for (Eigen::Index i = 0; i < p.size(); ++i) {
                Eigen::VectorXd pp = p;
                const double h = 1e-7 * std::max(1.0, std::abs(p(i)));
                pp(i) += h;
                jac.col(i) = (residuals(pp) - r) / h;
            }
            const Eigen::MatrixXd jtj = jac.transpose() * jac;
            const Eigen::VectorXd g = jac.transpose() * r;
            if (g.norm() < 1e-15) break;
            Eigen::MatrixXd lhs = jtj;
            lhs.diagonal().array() += mu * (1.0 + jtj.diagonal().array());
            const Eigen::VectorXd step = lhs.ldlt().solve(-g);
            const Eigen::VectorXd r_new = residuals(p + step);
            if (r_new.squaredNorm() < r.squaredNorm()) {
                p += step;
                r = r_new;
                mu = std::max(mu / 3.0, 1e-12);
            } else {
                mu *= 4.0;
                if (mu > 1e12) break;
            }
        }
        const CouplingParams cp = unpack(p);
        double sym_res = 0.0;
        for (const auto& t : basis) sym_res = std::max(sym_res, max_abs(op_r(t, cp, theta, j_mat)));
        const double theta_norm = op_r(theta.matrix(), cp, theta, j_mat).norm();
        const double score = theta_norm > 0.0 ? sym_res / theta_norm : std::numeric_limits<double>::infinity();
        if (score < best_score) {
            best_score = score;
            best.coupling = cp;
            best.r_sym_residual = sym_res;
            best.r_theta_norm = theta_norm;
            best.found = sym_res <= tol.residual && theta_norm >= 0.5;
        }
    }
    return best;
}

}  // namespace quasilin
