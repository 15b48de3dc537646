#pragma once

// Random instance generators and brute-force reference implementations
// shared by the unit tests and the acceptance runner.

#include "quasilin/classical_oracle.hpp"
#include "quasilin/moment_dynamics.hpp"
#include "quasilin/system_model.hpp"
#include "quasilin/weyl_algebra.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace qtest {

using quasilin::Complex;
using Rng = std::mt19937_64;
using Word = std::vector<std::size_t>;
using WordMap = std::map<Word, Complex>;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * uniform(rng);
    return m;
}

inline Eigen::MatrixXd random_symmetric(Rng& rng, Eigen::Index n, double scale = 1.0) {
    const Eigen::MatrixXd a = random_matrix(rng, n, n, scale);
    return (a + a.transpose()) / 2.0;
}

inline Eigen::MatrixXd random_antisymmetric(Rng& rng, Eigen::Index n, double scale = 1.0) {
    const Eigen::MatrixXd a = random_matrix(rng, n, n, scale);
    return a - a.transpose();
}

/// Nonsingular CCR matrix S J0 S^T for even n, S near the identity.
inline Eigen::MatrixXd random_nonsingular_theta(Rng& rng, Eigen::Index n) {
    const Eigen::MatrixXd j0 = quasilin::CcrMatrix::canonical(static_cast<std::size_t>(n)).matrix();
    const Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n) + random_matrix(rng, n, n, 0.3);
    const Eigen::MatrixXd t = s * j0 * s.transpose();
    return (t - t.transpose()) / 2.0;
}

inline quasilin::WeylPoly random_poly(const quasilin::WeylAlgebra& alg, Rng& rng, std::size_t max_degree,
                                      std::size_t terms) {
    quasilin::WeylPoly p = alg.zero();
    for (std::size_t t = 0; t < terms; ++t) {
        Word w(pick(rng, 0, max_degree));
        for (auto& k : w) k = pick(rng, 0, alg.dimension() - 1);
        p += alg.word(w, Complex(uniform(rng), uniform(rng)));
    }
    return p;
}

// ---------------------------------------------------------------- rewriter

/// Reference normal ordering: swap one adjacent out-of-order pair per step,
/// X_a X_b = X_b X_a + i theta_ab, until every word is sorted.
inline WordMap brute_normalize(const WordMap& input, const Eigen::MatrixXd& theta) {
    WordMap pending = input;
    WordMap done;
    while (!pending.empty()) {
        auto it = pending.begin();
        const Word w = it->first;
        const Complex c = it->second;
        pending.erase(it);
        if (c == Complex{}) continue;
        std::size_t i = 0;
        while (i + 1 < w.size() && w[i] <= w[i + 1]) ++i;
        if (i + 1 >= w.size()) {
            done[w] += c;
            continue;
        }
        Word swapped = w;
        std::swap(swapped[i], swapped[i + 1]);
        pending[swapped] += c;
        Word shorter;
        for (std::size_t k = 0; k < w.size(); ++k)
            if (k != i && k != i + 1) shorter.push_back(w[k]);
        const double th = theta(static_cast<Eigen::Index>(w[i]), static_cast<Eigen::Index>(w[i + 1]));
        if (th != 0.0) pending[shorter] += c * Complex(0.0, th);
    }
    return done;
}

inline WordMap to_words(const quasilin::WeylPoly& p) {
    WordMap out;
    for (const auto& [m, c] : p.terms()) out[m.indices()] += c;
    return out;
}

inline WordMap brute_product(const WordMap& p, const WordMap& q, const Eigen::MatrixXd& theta) {
    WordMap raw;
    for (const auto& [a, ca] : p)
        for (const auto& [b, cb] : q) {
            Word w = a;
            w.insert(w.end(), b.begin(), b.end());
            raw[w] += ca * cb;
        }
    return brute_normalize(raw, theta);
}

inline double word_map_distance(const WordMap& a, const WordMap& b) {
    double d = 0.0;
    for (const auto& [w, c] : a) {
        const auto it = b.find(w);
        d = std::max(d, std::abs(c - (it == b.end() ? Complex{} : it->second)));
    }
    for (const auto& [w, c] : b)
        if (!a.contains(w)) d = std::max(d, std::abs(c));
    return d;
}

// ------------------------------------------------------------ instances

inline quasilin::AdmissibleFamilyParams random_family_params(Rng& rng, std::size_t n) {
    quasilin::AdmissibleFamilyParams p;
    p.e = random_matrix(rng, static_cast<Eigen::Index>(n), 1);
    p.r = uniform(rng, 0.2, 1.0);
    p.c = uniform(rng);
    p.lambda = uniform(rng);
    p.m1 = random_matrix(rng, 1, static_cast<Eigen::Index>(n));
    return p;
}

/// Admissible quadratic plant with vacuum field and nonsingular Theta.
inline quasilin::SystemParams random_admissible_params(Rng& rng, std::size_t n) {
    const auto ni = static_cast<Eigen::Index>(n);
    quasilin::HamiltonianParams hp{random_matrix(rng, ni, 1, 0.5), random_symmetric(rng, ni)};
    return {quasilin::CcrMatrix(random_nonsingular_theta(rng, ni)), quasilin::vacuum_ito(2),
            quasilin::admissible_family(n, random_family_params(rng, n)), hp, {}};
}

/// Random Hermitian PSD Ito matrix of order m.
inline quasilin::ItoMatrix random_ito(Rng& rng, std::size_t m) {
    const auto mi = static_cast<Eigen::Index>(m);
    Eigen::MatrixXcd g(mi, mi);
    for (Eigen::Index i = 0; i < mi; ++i)
        for (Eigen::Index j = 0; j < mi; ++j) g(i, j) = Complex(uniform(rng), uniform(rng));
    Eigen::MatrixXcd w = g * g.adjoint() / static_cast<double>(m);
    w = (w + w.adjoint()).eval() / 2.0;
    return quasilin::ItoMatrix(w);
}

/// Linear plant (R_j = 0) with random Theta, Omega and M.
inline quasilin::SystemParams random_linear_params(Rng& rng, std::size_t n, std::size_t m) {
    const auto ni = static_cast<Eigen::Index>(n);
    quasilin::CouplingParams cp;
    cp.m_mat = random_matrix(rng, static_cast<Eigen::Index>(m), ni);
    cp.r_list.assign(m, Eigen::MatrixXd::Zero(ni, ni));
    const Eigen::MatrixXd theta = n % 2 == 0 ? random_nonsingular_theta(rng, ni) : random_antisymmetric(rng, ni);
    quasilin::HamiltonianParams hp{random_matrix(rng, ni, 1, 0.5), random_symmetric(rng, ni)};
    return {quasilin::CcrMatrix(theta), random_ito(rng, m), cp, hp, {}};
}

/// Coupling with random symmetric R_j: realizability generically fails.
inline quasilin::SystemParams random_broken_params(Rng& rng, std::size_t n) {
    quasilin::SystemParams p = random_admissible_params(rng, n);
    const auto ni = static_cast<Eigen::Index>(n);
    p.coupling.r_list = {random_symmetric(rng, ni), random_symmetric(rng, ni)};
    return p;
}

/// Sigma with Sigma + i Theta / 2 positive definite.
inline Eigen::MatrixXd random_quantum_covariance(Rng& rng, const Eigen::MatrixXd& theta) {
    const Eigen::Index n = theta.rows();
    const Eigen::MatrixXd g = random_matrix(rng, n, n, 0.5);
    const double th = Eigen::JacobiSVD<Eigen::MatrixXd>(theta).singularValues()(0);
    return g * g.transpose() + (th / 2.0 + 0.1) * Eigen::MatrixXd::Identity(n, n);
}

// ---------------------------------------------------- reference formulas

/// R(T) = Theta sum_jk J_jk R_j T R_k Theta by explicit summation.
inline Eigen::MatrixXd ref_op_r(const Eigen::MatrixXd& t, const std::vector<Eigen::MatrixXd>& r,
                                const Eigen::MatrixXd& theta, const Eigen::MatrixXd& j) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(t.rows(), t.cols());
    for (std::size_t a = 0; a < r.size(); ++a)
        for (std::size_t b = 0; b < r.size(); ++b)
            acc += j(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * r[a] * t * r[b];
    return theta * acc * theta;
}

/// Gaussian moment E(X_{w_1} ... X_{w_d}) by enumerating every partition
/// of the positions into singletons (mean) and ordered pairs (S).
inline Complex ref_gaussian_moment(const Word& w, const Eigen::VectorXd& alpha, const Eigen::MatrixXcd& s) {
    std::vector<int> used(w.size(), 0);
    std::function<Complex(std::size_t)> rec = [&](std::size_t pos) -> Complex {
        while (pos < w.size() && used[pos]) ++pos;
        if (pos == w.size()) return 1.0;
        used[pos] = 1;
        Complex total = alpha(static_cast<Eigen::Index>(w[pos])) * rec(pos + 1);
        for (std::size_t q = pos + 1; q < w.size(); ++q) {
            if (used[q]) continue;
            used[q] = 1;
            total += s(static_cast<Eigen::Index>(w[pos]), static_cast<Eigen::Index>(w[q])) * rec(pos + 1);
            used[q] = 0;
        }
        used[pos] = 0;
        return total;
    };
    return rec(0);
}

/// Covariance of dX = AX dt + G dW, E dW dW^T = W dt, by the Van Loan block
/// exponential: S(t) = e^{At} S0 e^{A^T t} + int_0^t e^{As} Q e^{A^T s} ds.
inline Eigen::MatrixXcd van_loan_covariance(const Eigen::MatrixXd& a, const Eigen::MatrixXcd& q,
                                            const Eigen::MatrixXcd& s0, double t) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    c.topLeftCorner(n, n) = -a.cast<Complex>() * t;
    c.topRightCorner(n, n) = q * t;
    c.bottomRightCorner(n, n) = a.transpose().cast<Complex>() * t;
    const Eigen::MatrixXcd f = c.exp();
    const Eigen::MatrixXcd eat = f.bottomRightCorner(n, n).transpose();
    const Eigen::MatrixXcd integral = eat * f.topRightCorner(n, n);
    return eat * s0 * eat.transpose() + integral;
}

/// Steady covariance from the n^2 x n^2 Kronecker form of
/// A S + S A^T - V(S) + Q = 0 with V(S) = -sum_jk v_jk L_j S L_k^T.
inline Eigen::MatrixXd kron_steady_covariance(const quasilin::QuasilinearSystem& sys, const Eigen::MatrixXd& q) {
    const Eigen::Index n = sys.a_mat.rows();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd op = Eigen::kroneckerProduct(id, sys.a_mat) + Eigen::kroneckerProduct(sys.a_mat, id);
    for (std::size_t j = 0; j < sys.lin_disp.size(); ++j)
        for (std::size_t k = 0; k < sys.lin_disp.size(); ++k)
            op += sys.v_mat(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) *
                  Eigen::kroneckerProduct(sys.lin_disp[k], sys.lin_disp[j]);
    const Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
    const Eigen::VectorXd x = op.fullPivLu().solve(rhs);
    Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n);
    return (s + s.transpose()) / 2.0;
}

}  // namespace qtest
