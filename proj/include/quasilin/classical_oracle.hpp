#pragma once

// Monte-Carlo check of the moment equations in the commutative limit
// Theta = 0, where the system is the bilinear Ito SDE
//   dX = (AX + beta) dt + sum_j (b0_j + B_j X) dW_j,  E dW dW^T = V dt.

#include "quasilin/moment_dynamics.hpp"
#include "quasilin/system_model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace quasilin {

struct ClassicalSde {
    Eigen::MatrixXd a_mat;                  // n x n
    Eigen::VectorXd beta;                   // n
    Eigen::MatrixXd const_disp;             // n x m, column j is b0_j
    std::vector<Eigen::MatrixXd> lin_disp;  // m matrices, n x n
    Eigen::MatrixXd noise_cov;              // m x m symmetric PSD

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(a_mat.rows()); }
    std::size_t channels() const noexcept { return static_cast<std::size_t>(const_disp.cols()); }
    /// Shapes and symmetry; PSD-ness of V is checked by simulate.
    void validate() const;
    /// Same dynamics as a generic system with Theta = 0 and J = 0.
    QuasilinearSystem to_quasilinear() const;
};

/// Gaussian law of X(0); the covariance may be singular.
struct InitialDistribution {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

struct McOptions {
    std::size_t paths = 100'000;
    double dt = 1e-3;
    double t_final = 2.0;
    std::uint64_t seed = 0;
    std::size_t r_max = 3;
    std::size_t threads = 0;  // 0: hardware concurrency
};

/// Empirical moments E X_k at t_final over the reduced index space, with
/// delete-one-block jackknife standard errors.
struct McResult {
    MomentIndexSpace space;
    Eigen::VectorXd mean;
    Eigen::VectorXd std_error;
    std::size_t paths = 0;
    std::size_t steps = 0;
    double dt = 0.0;
    double t_final = 0.0;
};

/// Euler-Maruyama. Paths are grouped into a fixed number of blocks with one
/// RNG stream per path, so the result does not depend on the thread count.
/// Throws NotPositiveSemidefinite if V or the initial covariance is not PSD.
McResult simulate(const ClassicalSde& sde, const InitialDistribution& x0, const McOptions& options);

/// Moments predicted by the closed moment ODE, same index space as simulate.
Eigen::VectorXd predicted_moments(const ClassicalSde& sde, const InitialDistribution& x0, std::size_t r_max,
                                  double t_final);

struct ZScoreEntry {
    std::string label;
    double empirical = 0.0;
    double predicted = 0.0;
    double std_error = 0.0;
    double z = 0.0;
};

struct ZScoreReport {
    std::vector<ZScoreEntry> entries;
    double max_abs_z = 0.0;
    double threshold = 3.0;
    bool passed = false;
};

/// z = (empirical - predicted) / SE per moment. Moments with zero standard
/// error count as z = 0 if they agree to 1e-12 and as infinite otherwise.
ZScoreReport compare(const McResult& mc, const Eigen::VectorXd& predicted, double threshold = 3.0);

}  // namespace quasilin
