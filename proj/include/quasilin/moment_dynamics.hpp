#pragma once

// Closed linear ODE for mixed moments mu_k = E(X_{k_1} ... X_{k_r}) of a
// quasilinear system, mean/covariance dynamics, quadratic stability, and
// steady states.

#include "quasilin/ode.hpp"
#include "quasilin/system_model.hpp"
#include "quasilin/weyl_algebra.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace quasilin {

/// Multi-indices of degree 0..r_max in degree-major lexicographic order.
/// The reduced basis holds non-decreasing indices only (every other moment
/// follows from them through the CCRs); the full basis holds all n^d words.
class MomentIndexSpace {
public:
    enum class Basis { Reduced, Full };

    MomentIndexSpace(std::size_t n, std::size_t r_max, Basis basis = Basis::Reduced);

    std::size_t dimension() const noexcept { return n_; }
    std::size_t r_max() const noexcept { return r_max_; }
    Basis basis() const noexcept { return basis_; }
    std::size_t size() const noexcept { return indices_.size(); }

    const Monomial& index(std::size_t pos) const { return indices_.at(pos); }
    std::optional<std::size_t> find(const Monomial& m) const;
    std::size_t position(const Monomial& m) const;
    /// First position with the given degree; degree_offset(r_max + 1) == size().
    std::size_t degree_offset(std::size_t degree) const { return offsets_.at(degree); }

    /// "m_112" for X1X1X2 (1-based). Indices are separated by '_' when
    /// n > 9; the empty index prints as "m_0".
    std::string label(std::size_t pos) const;
    static std::string label(const Monomial& m, std::size_t n);

    friend bool operator==(const MomentIndexSpace& a, const MomentIndexSpace& b) {
        return a.n_ == b.n_ && a.r_max_ == b.r_max_ && a.basis_ == b.basis_;
    }

private:
    std::size_t n_;
    std::size_t r_max_;
    Basis basis_;
    std::vector<Monomial> indices_;
    std::vector<std::size_t> offsets_;
    std::map<Monomial, std::size_t> lookup_;
};

/// d mu / dt = psi * mu over a MomentIndexSpace.
struct MomentGenerator {
    MomentIndexSpace space;
    Eigen::MatrixXcd psi;

    /// No entry couples a degree-d moment to a moment of higher degree.
    bool is_block_lower_triangular(double tol = 0.0) const;
};

MomentGenerator build_generator(const QuasilinearSystem& sys, std::size_t r_max,
                                MomentIndexSpace::Basis basis = MomentIndexSpace::Basis::Reduced,
                                double prune_tolerance = 1e-12);

/// Mean alpha and real covariance Sigma; the quantum covariance is
/// S = Sigma + i Theta / 2.
struct GaussianState {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd sigma;
};

/// Moments of the Gaussian state by Wick's theorem with the ordered
/// covariance S (pair (a, b), a before b, contributes S_{k_a k_b}).
/// Throws NotPositiveSemidefinite if S is not PSD.
Eigen::VectorXcd gaussian_initial_moments(const GaussianState& state, const Eigen::MatrixXd& theta,
                                          const MomentIndexSpace& space, double psd_tol = 1e-10);

/// Expresses every word of the full basis through the reduced moments.
Eigen::VectorXcd expand_to_full(const Eigen::VectorXcd& reduced, const MomentIndexSpace& reduced_space,
                                const Eigen::MatrixXd& theta, double prune_tolerance = 1e-12);

enum class PropagationMethod { RungeKutta45, MatrixExponential };

struct PropagationOptions {
    PropagationMethod method = PropagationMethod::RungeKutta45;
    OdeOptions ode{};
};

struct MomentTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> values;
};

/// mu(t) = exp(psi t) mu(0) on the grid (t_grid[0] must be 0).
MomentTrajectory propagate(const MomentGenerator& gen, const Eigen::VectorXcd& mu0, std::span<const double> t_grid,
                           const PropagationOptions& options = {});

struct MeanCovRates {
    Eigen::VectorXd alpha_dot;
    Eigen::MatrixXd sigma_dot;
};

/// alpha' = A alpha + beta,
/// Sigma' = A Sigma + Sigma A^T - V(Sigma) + B V B^T + R(Theta)/4 - E(alpha) - V(alpha alpha^T).
MeanCovRates mean_cov_rates(const QuasilinearSystem& sys, const Eigen::VectorXd& alpha, const Eigen::MatrixXd& sigma);

/// Rate of Pi = E(X X^T):
/// A Pi + Pi A^T + beta alpha^T + alpha beta^T + B V B^T + R(Theta)/4 - E(alpha) - V(Pi) + i B J B^T / 2.
Eigen::MatrixXcd second_moment_rate(const QuasilinearSystem& sys, const Eigen::VectorXd& alpha,
                                    const Eigen::MatrixXcd& pi);

struct MeanCovTrajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> alpha;
    std::vector<Eigen::MatrixXd> sigma;
};

MeanCovTrajectory mean_cov_ode(const QuasilinearSystem& sys, const GaussianState& state0,
                               std::span<const double> t_grid, const OdeOptions& options = {});

/// Matrix of Sigma -> A Sigma + Sigma A^T - V(Sigma) in the basis E_ii,
/// E_ij + E_ji (i < j) of symmetric matrices; order n(n+1)/2.
Eigen::MatrixXd lyapunov_lift(const QuasilinearSystem& sys);

struct StabilityVerdict {
    bool a_hurwitz = false;
    double a_spectral_abscissa = 0.0;
    std::vector<Complex> lyap_spectrum;
    bool quadratically_stable = false;
    double spectral_abscissa = 0.0;
};

StabilityVerdict stability(const QuasilinearSystem& sys);

struct SteadyState {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd sigma;
    double residual = 0.0;  // Frobenius norm of the Sigma equation
};

/// Throws NotStable unless the lifted operator is Hurwitz.
SteadyState steady_state(const QuasilinearSystem& sys);

/// Packs a symmetric matrix into the lift coordinates and back.
Eigen::VectorXd sym_to_coords(const Eigen::MatrixXd& s);
Eigen::MatrixXd coords_to_sym(const Eigen::VectorXd& c, std::size_t n);

}  // namespace quasilin
