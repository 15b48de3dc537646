#pragma once

// Noncommutative polynomials in canonical observables X_1..X_n obeying
// [X_j, X_k] = i * theta_jk. Every polynomial is kept in canonical form:
// each monomial lists its factors in non-decreasing index order. Indices
// are 0-based throughout the API.

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace quasilin {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxDegree = 12;
inline constexpr std::size_t kMaxObservables = 255;

/// Real antisymmetric CCR matrix. Antisymmetry is checked exactly; the
/// matrix may be singular.
class CcrMatrix {
public:
    explicit CcrMatrix(Eigen::MatrixXd theta);

    static CcrMatrix zero(std::size_t n);
    /// theta_12 = 1 block structure: [[0,1],[-1,0]] (x) I_{n/2}.
    static CcrMatrix canonical(std::size_t n);

    std::size_t dimension() const noexcept { return static_cast<std::size_t>(theta_.rows()); }
    double operator()(std::size_t j, std::size_t k) const { return theta_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)); }
    const Eigen::MatrixXd& matrix() const noexcept { return theta_; }
    bool is_zero() const noexcept { return theta_.isZero(0.0); }

    friend bool operator==(const CcrMatrix& a, const CcrMatrix& b) { return a.theta_ == b.theta_; }

private:
    Eigen::MatrixXd theta_;
};

/// A word X_{k_1} ... X_{k_d} of at most kMaxDegree factors. Ordered
/// degree-major, then lexicographically.
class Monomial {
public:
    Monomial() = default;
    Monomial(std::initializer_list<std::size_t> indices);
    explicit Monomial(std::span<const std::size_t> indices);

    std::size_t degree() const noexcept { return size_; }
    bool empty() const noexcept { return size_ == 0; }
    std::size_t operator[](std::size_t pos) const noexcept { return idx_[pos]; }
    bool is_canonical() const noexcept;

    std::vector<std::size_t> indices() const;
    Monomial without(std::size_t pos) const;
    Monomial appended(std::size_t index) const;
    Monomial slice(std::size_t begin, std::size_t end) const;
    Monomial reversed() const;

    /// "X1X2X2" (1-based); identity prints as "1".
    std::string to_string() const;

    auto operator<=>(const Monomial&) const = default;

private:
    std::uint8_t size_ = 0;
    std::array<std::uint8_t, kMaxDegree> idx_{};
};

class WeylPoly;

/// A word with a coefficient, not necessarily in canonical order.
struct RawTerm {
    std::vector<std::size_t> word;
    Complex coefficient;
};

/// Shared handle to (Theta, prune tolerance). Cheap to copy.
class WeylAlgebra {
public:
    explicit WeylAlgebra(CcrMatrix ccr, double prune_tolerance = 1e-12);

    std::size_t dimension() const noexcept;
    const CcrMatrix& ccr() const noexcept;
    double prune_tolerance() const noexcept;

    /// True when both handles describe the same algebra.
    bool compatible(const WeylAlgebra& other) const noexcept;

    WeylPoly zero() const;
    WeylPoly one() const;
    WeylPoly constant(Complex c) const;
    WeylPoly generator(std::size_t j) const;
    /// Canonical form of the word product, scaled by c.
    WeylPoly word(std::span<const std::size_t> indices, Complex c = 1.0) const;
    WeylPoly word(std::initializer_list<std::size_t> indices, Complex c = 1.0) const;
    WeylPoly normalize(std::span<const RawTerm> raw) const;

private:
    struct State {
        CcrMatrix ccr;
        double prune;
    };
    std::shared_ptr<const State> state_;
};

class WeylPoly {
public:
    using TermMap = std::map<Monomial, Complex>;

    explicit WeylPoly(WeylAlgebra algebra) : algebra_(std::move(algebra)) {}

    const WeylAlgebra& algebra() const noexcept { return algebra_; }
    const TermMap& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }
    /// Largest monomial length; 0 for constants and for the zero polynomial.
    std::size_t degree() const noexcept;
    Complex coefficient(const Monomial& m) const;
    double max_abs_coefficient() const noexcept;
    /// Terms of exactly the given degree.
    WeylPoly homogeneous_part(std::size_t degree) const;
    /// Terms of degree >= min_degree.
    WeylPoly part_from_degree(std::size_t min_degree) const;

    WeylPoly operator-() const;
    WeylPoly& operator+=(const WeylPoly& q);
    WeylPoly& operator-=(const WeylPoly& q);
    WeylPoly& operator*=(Complex c);

    friend WeylPoly operator+(WeylPoly p, const WeylPoly& q) { return p += q; }
    friend WeylPoly operator-(WeylPoly p, const WeylPoly& q) { return p -= q; }
    friend WeylPoly operator*(WeylPoly p, Complex c) { return p *= c; }
    friend WeylPoly operator*(Complex c, WeylPoly p) { return p *= c; }
    friend WeylPoly operator*(const WeylPoly& p, const WeylPoly& q);

    /// Coefficientwise comparison: max |p_k - q_k| <= tol.
    bool approx_equal(const WeylPoly& q, double tol) const;
    std::string to_string() const;

private:
    friend class WeylAlgebra;
    void add_term(const Monomial& m, Complex c);
    void prune();

    WeylAlgebra algebra_;
    TermMap terms_;
};

WeylPoly mul(const WeylPoly& p, const WeylPoly& q);
/// pq - qp.
WeylPoly commutator(const WeylPoly& p, const WeylPoly& q);
/// Reverses every word, conjugates coefficients, renormalizes.
WeylPoly adjoint(const WeylPoly& p);

struct AffineParts {
    Complex constant;
    Eigen::VectorXcd linear;
    WeylPoly residual;  // degree >= 2 terms only

    bool is_affine() const noexcept { return residual.is_zero(); }
};

AffineParts affine_parts(const WeylPoly& p);

/// Entrywise polynomial vector with fixed length.
class PolyVector {
public:
    PolyVector(const WeylAlgebra& algebra, std::size_t size);

    std::size_t size() const noexcept { return entries_.size(); }
    WeylPoly& operator[](std::size_t i) { return entries_.at(i); }
    const WeylPoly& operator[](std::size_t i) const { return entries_.at(i); }
    auto begin() const noexcept { return entries_.begin(); }
    auto end() const noexcept { return entries_.end(); }
    const WeylAlgebra& algebra() const noexcept { return algebra_; }

    double max_abs_coefficient() const noexcept;
    bool approx_equal(const PolyVector& other, double tol) const;

private:
    WeylAlgebra algebra_;
    std::vector<WeylPoly> entries_;
};

/// Row-major polynomial matrix with fixed shape.
class PolyMatrix {
public:
    PolyMatrix(const WeylAlgebra& algebra, std::size_t rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    WeylPoly& operator()(std::size_t i, std::size_t j) { return entries_.at(i * cols_ + j); }
    const WeylPoly& operator()(std::size_t i, std::size_t j) const { return entries_.at(i * cols_ + j); }
    const WeylAlgebra& algebra() const noexcept { return algebra_; }

    PolyVector column(std::size_t j) const;
    double max_abs_coefficient() const noexcept;
    bool approx_equal(const PolyMatrix& other, double tol) const;

private:
    WeylAlgebra algebra_;
    std::size_t rows_;
    std::size_t cols_;
    std::vector<WeylPoly> entries_;
};

/// The vector X = (X_1, ..., X_n).
PolyVector generators(const WeylAlgebra& algebra);
/// c^T X.
WeylPoly linear_form(const WeylAlgebra& algebra, const Eigen::Ref<const Eigen::VectorXcd>& c);
/// sum_{ab} q_ab X_a X_b, i.e. X^T Q X.
WeylPoly quadratic_form(const WeylAlgebra& algebra, const Eigen::Ref<const Eigen::MatrixXcd>& q);

}  // namespace quasilin
