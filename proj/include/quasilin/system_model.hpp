#pragma once

// Plant description (Theta, Omega, M, R_j, gamma, R_0), the open-system
// operators derived from it, CCR-preservation checks, and construction
// of the quasilinear QSDE dX = (AX + beta) dt + Theta (M^T + Y) dW.

#include "quasilin/tolerance.hpp"
#include "quasilin/weyl_algebra.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace quasilin {

/// Quantum Ito matrix Omega with V = Re Omega and J = 2 Im Omega.
class ItoMatrix {
public:
    explicit ItoMatrix(Eigen::MatrixXcd omega, const TolerancePolicy& tol = {});

    std::size_t channels() const noexcept { return static_cast<std::size_t>(omega_.rows()); }
    const Eigen::MatrixXcd& omega() const noexcept { return omega_; }
    Eigen::MatrixXd v() const { return omega_.real(); }
    Eigen::MatrixXd j() const { return 2.0 * omega_.imag(); }

private:
    Eigen::MatrixXcd omega_;
};

/// Vacuum field: Omega = (I_m + i [[0,1],[-1,0]] (x) I_{m/2}) / 2. m must be even.
ItoMatrix vacuum_ito(std::size_t m);

/// h_j = M_j X + X^T R_j X / 2.
struct CouplingParams {
    Eigen::MatrixXd m_mat;                 // m x n
    std::vector<Eigen::MatrixXd> r_list;   // m symmetric n x n

    std::size_t channels() const noexcept { return static_cast<std::size_t>(m_mat.rows()); }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(m_mat.cols()); }
    bool is_linear() const;
    /// Throws std::invalid_argument on inconsistent shapes or asymmetric R_j.
    void validate(std::size_t n) const;
};

struct HamiltonianParams {
    Eigen::VectorXd gamma;  // n
    Eigen::MatrixXd r0;     // symmetric n x n

    void validate(std::size_t n) const;
};

struct SystemParams {
    CcrMatrix theta;
    ItoMatrix omega;
    CouplingParams coupling;
    HamiltonianParams hamiltonian;
    TolerancePolicy tolerance{};

    std::size_t dimension() const noexcept { return theta.dimension(); }
    void validate() const;
};

struct ResidualCheck {
    bool passed = false;
    double max_residual = 0.0;
};

struct RealizabilityReport {
    ResidualCheck m_op_zero;          // M(u) = 0 on R^n
    ResidualCheck r_op_zero_sym;      // R(T) = 0 on symmetric matrices
    double kron_test_residual = 0.0;  // || sum J_jk (Theta R_j) (x) (Theta R_k) ||_F
    std::optional<double> pr_residual;
    std::vector<double> phi_symmetry_residuals;  // empty when Theta is singular

    bool passed() const noexcept { return m_op_zero.passed && r_op_zero_sym.passed; }
};

/// dX = (AX + beta) dt + sum_j (b_j + L_j X) dW_j with E dW dW^T = (V + iJ/2) dt.
/// For a plant built from (H, h): b_j = Theta M_j^T and L_j = Theta R_j.
struct QuasilinearSystem {
    Eigen::MatrixXd a_mat;
    Eigen::VectorXd beta;
    Eigen::MatrixXd b_mat;                  // n x m
    std::vector<Eigen::MatrixXd> lin_disp;  // m matrices, n x n
    Eigen::MatrixXd theta;
    Eigen::MatrixXd v_mat;
    Eigen::MatrixXd j_mat;
    Eigen::MatrixXd k_mat;                  // B J M / 2; empty unless built from a plant
    std::optional<RealizabilityReport> report;

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(a_mat.rows()); }
    std::size_t channels() const noexcept { return static_cast<std::size_t>(b_mat.cols()); }
    Eigen::MatrixXcd omega() const;
    void validate() const;
};

// -------------------------------------------------------------- operators

PolyVector coupling_vector(const CouplingParams& cp, const WeylAlgebra& algebra);
/// G = Theta (M^T + Y), assembled from the matrices.
PolyMatrix dispersion(const CouplingParams& cp, const WeylAlgebra& algebra);
/// G = -i [X, h^T], computed symbolically.
PolyMatrix dispersion_from_coupling(const PolyVector& h);

/// L(X)_p = sum_jk omega_jk (h_j [X_p, h_k] + [h_j, X_p] h_k) / 2.
PolyVector gksl_direct(const PolyVector& h, const ItoMatrix& omega);
/// L(X) = (G J h + i sum_jk omega_jk [h_j, g_k]) / 2.
PolyVector gksl_lemma1(const PolyVector& h, const PolyMatrix& g, const ItoMatrix& omega);

/// Theta sum_jk W_jk (M_j^T u^T R_k + R_j u M_k) Theta. With W = J this is
/// the CCR operator M(u); with W = V it is E(u).
Eigen::MatrixXd op_m(const Eigen::VectorXd& u, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& j_mat);
Eigen::MatrixXd op_e(const Eigen::VectorXd& u, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& v_mat);
/// Theta sum_jk W_jk R_j T R_k Theta, with W = J (R) or W = V (V).
Eigen::MatrixXd op_r(const Eigen::MatrixXd& t, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& j_mat);
Eigen::MatrixXd op_v(const Eigen::MatrixXd& t, const CouplingParams& cp, const CcrMatrix& theta,
                     const Eigen::MatrixXd& v_mat);

/// Phi_k = sum_ps J_ps (R_p)_{.k} M_s; the entries of Y J M are sum_k Phi_k X_k.
std::vector<Eigen::MatrixXd> phi_matrices(const CouplingParams& cp, const Eigen::MatrixXd& j_mat);

RealizabilityReport check_realizability(const CouplingParams& cp, const CcrMatrix& theta,
                                        const ItoMatrix& omega, const TolerancePolicy& tol = {});

struct AdmissibleFamilyParams {
    Eigen::VectorXd e;   // direction of the rank-one quadratic part
    double r = 1.0;
    double c = 0.0;
    double lambda = 0.0;
    Eigen::RowVectorXd m1;
};

/// Two-channel coupling with R_1 = r e e^T, R_2 = c R_1, M_2 = c M_1 + lambda e^T.
/// M and R vanish identically under the standard J = [[0,1],[-1,0]].
CouplingParams admissible_family(std::size_t n, const AdmissibleFamilyParams& params);

/// Delta = X^T Y J M X, the homogeneous cubic part of the Hamiltonian (times -12).
WeylPoly delta_polynomial(const CouplingParams& cp, const WeylAlgebra& algebra, const Eigen::MatrixXd& j_mat);
/// Theta Y J M X as a polynomial vector.
PolyVector theta_yjm_x(const CouplingParams& cp, const WeylAlgebra& algebra, const Eigen::MatrixXd& j_mat);
/// G J G^T as a polynomial matrix.
PolyMatrix gjg_transpose(const PolyMatrix& g, const Eigen::MatrixXd& j_mat);

/// H = gamma^T X + X^T R_0 X / 2 - X^T Y J M X / 12. Requires nonsingular
/// Theta whenever the coupling has a quadratic part, and passing
/// realizability checks.
WeylPoly cubic_hamiltonian(const HamiltonianParams& hp, const CouplingParams& cp, const WeylAlgebra& algebra,
                           const ItoMatrix& omega, const TolerancePolicy& tol = {});

/// F_p = i [H, X_p] + L(X)_p.
PolyVector drift(const WeylPoly& hamiltonian, const PolyVector& h, const ItoMatrix& omega);

/// Builds the cubic Hamiltonian and drift, extracts A and beta from the
/// affine drift, and records the realizability report (PR residual included).
/// Throws NonAffineDrift, ComplexDrift, or SingularCcrError.
QuasilinearSystem build_quasilinear(const SystemParams& params);

// -------------------------------------- system-level (generic) operators

/// V(T) = -sum_jk v_jk L_j T L_k^T. Coincides with op_v when L_j = Theta R_j.
Eigen::MatrixXd system_v(const QuasilinearSystem& sys, const Eigen::MatrixXd& t);
/// E(u) = -sum_jk v_jk (b_j (L_k u)^T + (L_j u) b_k^T).
Eigen::MatrixXd system_e(const QuasilinearSystem& sys, const Eigen::VectorXd& u);
/// R(Theta) = -sum_jk J_jk L_j Theta L_k^T.
Eigen::MatrixXd system_r_theta(const QuasilinearSystem& sys);
/// || A Theta + Theta A^T + B J B^T - V(Theta) ||_F.
double pr_residual(const QuasilinearSystem& sys);

// ------------------------------------------------------------ exploration

struct ActiveRThetaSearch {
    bool found = false;
    CouplingParams coupling;
    double r_sym_residual = 0.0;  // max |R(T)| over the symmetric basis
    double r_theta_norm = 0.0;    // ||R(Theta)||_F
};

/// Searches for quadratic parts R_1..R_m with R = 0 on symmetric matrices
/// but R(Theta) != 0 (Levenberg-Marquardt from random starts, normalized so
/// that ||R(Theta)||_F = 1 is targeted). Reports the best candidate.
ActiveRThetaSearch search_active_r_theta(const CcrMatrix& theta, const Eigen::MatrixXd& j_mat, std::size_t restarts,
                                         std::uint64_t seed, const TolerancePolicy& tol = {});

}  // namespace quasilin
