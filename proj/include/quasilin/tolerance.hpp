#pragma once

namespace quasilin {

/// Numerical thresholds shared by every module.
struct TolerancePolicy {
    double prune = 1e-12;        // drop polynomial coefficients below this magnitude
    double residual = 1e-9;      // pass/fail threshold for realizability residuals
    double hermitian = 1e-12;    // Ito matrix Hermitian check
    double psd = 1e-10;          // minimum eigenvalue allowed for PSD checks
    double imag_leak = 1e-10;    // imaginary parts allowed in A and beta
    double singular_det = 1e-12; // |det Theta| below this is singular
    double pr = 1e-8;            // A Theta + Theta A^T + B J B^T - V(Theta)
};

}  // namespace quasilin
