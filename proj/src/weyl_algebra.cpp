#include "quasilin/weyl_algebra.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace quasilin {

// ---------------------------------------------------------------- CcrMatrix

CcrMatrix::CcrMatrix(Eigen::MatrixXd theta) : theta_(std::move(theta)) {
    if (theta_.rows() < 1 || theta_.rows() != theta_.cols()) {
        throw std::invalid_argument("CcrMatrix: theta must be a non-empty square matrix");
    }
    if (static_cast<std::size_t>(theta_.rows()) > kMaxObservables) {
        throw std::invalid_argument("CcrMatrix: at most 255 observables are supported");
    }
    for (Eigen::Index j = 0; j < theta_.rows(); ++j) {
        for (Eigen::Index k = j; k < theta_.cols(); ++k) {
            if (theta_(j, k) != -theta_(k, j)) {
                throw std::invalid_argument("CcrMatrix: theta must be antisymmetric");
            }
        }
    }
}

CcrMatrix CcrMatrix::zero(std::size_t n) {
    const auto sz = static_cast<Eigen::Index>(n);
    return CcrMatrix(Eigen::MatrixXd::Zero(sz, sz));
}

CcrMatrix CcrMatrix::canonical(std::size_t n) {
    if (n % 2 != 0) {
        throw std::invalid_argument("CcrMatrix::canonical: n must be even");
    }
    const auto half = static_cast<Eigen::Index>(n / 2);
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(2 * half, 2 * half);
    for (Eigen::Index k = 0; k < half; ++k) {
        theta(k, half + k) = 1.0;
        theta(half + k, k) = -1.0;
    }
    return CcrMatrix(std::move(theta));
}

// ----------------------------------------------------------------- Monomial

Monomial::Monomial(std::initializer_list<std::size_t> indices)
    : Monomial(std::span<const std::size_t>(indices.begin(), indices.size())) {}

Monomial::Monomial(std::span<const std::size_t> indices) {
    if (indices.size() > kMaxDegree) {
        throw std::length_error("Monomial: degree exceeds the supported maximum of 12");
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= kMaxObservables) {
            throw std::out_of_range("Monomial: index out of range");
        }
        idx_[i] = static_cast<std::uint8_t>(indices[i]);
    }
    size_ = static_cast<std::uint8_t>(indices.size());
}

bool Monomial::is_canonical() const noexcept {
    return std::is_sorted(idx_.begin(), idx_.begin() + size_);
}

std::vector<std::size_t> Monomial::indices() const {
    return {idx_.begin(), idx_.begin() + size_};
}

Monomial Monomial::without(std::size_t pos) const {
    Monomial out;
    for (std::size_t i = 0; i < size_; ++i) {
        if (i != pos) {
            out.idx_[out.size_++] = idx_[i];
        }
    }
    return out;
}

Monomial Monomial::appended(std::size_t index) const {
    if (size_ >= kMaxDegree) {
        throw std::length_error("Monomial: degree exceeds the supported maximum of 12");
    }
    Monomial out = *this;
    out.idx_[out.size_++] = static_cast<std::uint8_t>(index);
    return out;
}

Monomial Monomial::slice(std::size_t begin, std::size_t end) const {
    Monomial out;
    for (std::size_t i = begin; i < end && i < size_; ++i) {
        out.idx_[out.size_++] = idx_[i];
    }
    return out;
}

Monomial Monomial::reversed() const {
    Monomial out = *this;
    std::reverse(out.idx_.begin(), out.idx_.begin() + size_);
    return out;
}

std::string Monomial::to_string() const {
    if (size_ == 0) {
        return "1";
    }
    std::string out;
    for (std::size_t i = 0; i < size_; ++i) {
        out += "X" + std::to_string(idx_[i] + 1);
    }
    return out;
}

// -------------------------------------------------------------- WeylAlgebra

namespace {

// Canonical monomial u times X_l: X_l is moved left past every factor with a
// larger index; each swap leaves behind i * theta(u_i, l) * (u without u_i).
void right_multiply(const WeylPoly::TermMap& in, std::size_t l, const CcrMatrix& ccr,
                    WeylPoly::TermMap& out) {
    for (const auto& [mono, c] : in) {
        const std::size_t d = mono.degree();
        if (d >= kMaxDegree) {
            throw std::length_error("WeylPoly: product degree exceeds the supported maximum of 12");
        }
        std::size_t insert_at = d;
        while (insert_at > 0 && mono[insert_at - 1] > l) {
            --insert_at;
        }
        std::vector<std::size_t> sorted = mono.indices();
        sorted.insert(sorted.begin() + static_cast<std::ptrdiff_t>(insert_at), l);
        out[Monomial(sorted)] += c;
        for (std::size_t i = insert_at; i < d; ++i) {
            const double t = ccr(mono[i], l);
            if (t != 0.0) {
                out[mono.without(i)] += c * Complex(0.0, t);
            }
        }
    }
}

WeylPoly::TermMap multiply_maps(const WeylPoly::TermMap& p, const WeylPoly::TermMap& q,
                                const CcrMatrix& ccr) {
    WeylPoly::TermMap result;
    for (const auto& [mq, cq] : q) {
        WeylPoly::TermMap cur = p;
        for (std::size_t f = 0; f < mq.degree(); ++f) {
            WeylPoly::TermMap next;
            right_multiply(cur, mq[f], ccr, next);
            cur = std::move(next);
        }
        for (const auto& [m, c] : cur) {
            result[m] += c * cq;
        }
    }
    return result;
}

void check_compatible(const WeylPoly& p, const WeylPoly& q) {
    if (!p.algebra().compatible(q.algebra())) {
        throw std::invalid_argument("WeylPoly: operands belong to different algebras");
    }
}

}  // namespace

WeylAlgebra::WeylAlgebra(CcrMatrix ccr, double prune_tolerance)
    : state_(std::make_shared<const State>(State{std::move(ccr), prune_tolerance})) {
    if (!(prune_tolerance >= 0.0)) {
        throw std::invalid_argument("WeylAlgebra: prune tolerance must be non-negative");
    }
}

std::size_t WeylAlgebra::dimension() const noexcept { return state_->ccr.dimension(); }
const CcrMatrix& WeylAlgebra::ccr() const noexcept { return state_->ccr; }
double WeylAlgebra::prune_tolerance() const noexcept { return state_->prune; }

bool WeylAlgebra::compatible(const WeylAlgebra& other) const noexcept {
    return state_ == other.state_ ||
           (state_->prune == other.state_->prune && state_->ccr == other.state_->ccr);
}

WeylPoly WeylAlgebra::zero() const { return WeylPoly(*this); }

WeylPoly WeylAlgebra::one() const { return constant(1.0); }

WeylPoly WeylAlgebra::constant(Complex c) const {
    WeylPoly p(*this);
    p.add_term(Monomial{}, c);
    p.prune();
    return p;
}

WeylPoly WeylAlgebra::generator(std::size_t j) const {
    if (j >= dimension()) {
        throw std::out_of_range("WeylAlgebra::generator: index out of range");
    }
    WeylPoly p(*this);
    p.add_term(Monomial{j}, 1.0);
    return p;
}

WeylPoly WeylAlgebra::word(std::span<const std::size_t> indices, Complex c) const {
    const std::size_t n = dimension();
    for (std::size_t k : indices) {
        if (k >= n) {
            throw std::out_of_range("WeylAlgebra: index out of range");
        }
    }
    WeylPoly::TermMap cur{{Monomial{}, c}};
    for (std::size_t k : indices) {
        WeylPoly::TermMap next;
        right_multiply(cur, k, state_->ccr, next);
        cur = std::move(next);
    }
    WeylPoly p(*this);
    p.terms_ = std::move(cur);
    p.prune();
    return p;
}

WeylPoly WeylAlgebra::word(std::initializer_list<std::size_t> indices, Complex c) const {
    return word(std::span<const std::size_t>(indices.begin(), indices.size()), c);
}

WeylPoly WeylAlgebra::normalize(std::span<const RawTerm> raw) const {
    WeylPoly result(*this);
    for (const RawTerm& term : raw) {
        result += word(term.word, term.coefficient);
    }
    return result;
}

// ----------------------------------------------------------------- WeylPoly

std::size_t WeylPoly::degree() const noexcept {
    return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

Complex WeylPoly::coefficient(const Monomial& m) const {
    const auto it = terms_.find(m);
    return it == terms_.end() ? Complex{} : it->second;
}

double WeylPoly::max_abs_coefficient() const noexcept {
    double out = 0.0;
    for (const auto& [m, c] : terms_) {
        out = std::max(out, std::abs(c));
    }
    return out;
}

WeylPoly WeylPoly::homogeneous_part(std::size_t degree) const {
    WeylPoly out(algebra_);
    for (const auto& [m, c] : terms_) {
        if (m.degree() == degree) {
            out.terms_.emplace(m, c);
        }
    }
    return out;
}

WeylPoly WeylPoly::part_from_degree(std::size_t min_degree) const {
    WeylPoly out(algebra_);
    for (const auto& [m, c] : terms_) {
        if (m.degree() >= min_degree) {
            out.terms_.emplace(m, c);
        }
    }
    return out;
}

WeylPoly WeylPoly::operator-() const {
    WeylPoly out = *this;
    for (auto& [m, c] : out.terms_) {
        c = -c;
    }
    return out;
}

WeylPoly& WeylPoly::operator+=(const WeylPoly& q) {
    check_compatible(*this, q);
    for (const auto& [m, c] : q.terms_) {
        terms_[m] += c;
    }
    prune();
    return *this;
}

WeylPoly& WeylPoly::operator-=(const WeylPoly& q) {
    check_compatible(*this, q);
    for (const auto& [m, c] : q.terms_) {
        terms_[m] -= c;
    }
    prune();
    return *this;
}

WeylPoly& WeylPoly::operator*=(Complex c) {
    for (auto& [m, coeff] : terms_) {
        coeff *= c;
    }
    prune();
    return *this;
}

WeylPoly operator*(const WeylPoly& p, const WeylPoly& q) {
    check_compatible(p, q);
    WeylPoly out(p.algebra_);
    out.terms_ = multiply_maps(p.terms_, q.terms_, p.algebra_.ccr());
    out.prune();
    return out;
}

bool WeylPoly::approx_equal(const WeylPoly& q, double tol) const {
    check_compatible(*this, q);
    auto a = terms_.begin();
    auto b = q.terms_.begin();
    while (a != terms_.end() || b != q.terms_.end()) {
        if (b == q.terms_.end() || (a != terms_.end() && a->first < b->first)) {
            if (std::abs(a->second) > tol) return false;
            ++a;
        } else if (a == terms_.end() || b->first < a->first) {
            if (std::abs(b->second) > tol) return false;
            ++b;
        } else {
            if (std::abs(a->second - b->second) > tol) return false;
            ++a;
            ++b;
        }
    }
    return true;
}

std::string WeylPoly::to_string() const {
    if (terms_.empty()) {
        return "0";
    }
    std::ostringstream os;
    os.precision(12);
    bool first = true;
    for (const auto& [m, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << "(" << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
        if (!m.empty()) os << " " << m.to_string();
    }
    return os.str();
}

void WeylPoly::add_term(const Monomial& m, Complex c) { terms_[m] += c; }

void WeylPoly::prune() {
    const double tol = algebra_.prune_tolerance();
    std::erase_if(terms_, [tol](const auto& kv) { return std::abs(kv.second) < tol || kv.second == Complex{}; });
}

// --------------------------------------------------------------- free funcs

WeylPoly mul(const WeylPoly& p, const WeylPoly& q) { return p * q; }

WeylPoly commutator(const WeylPoly& p, const WeylPoly& q) { return p * q - q * p; }

WeylPoly adjoint(const WeylPoly& p) {
    WeylPoly out = p.algebra().zero();
    for (const auto& [m, c] : p.terms()) {
        const std::vector<std::size_t> rev = m.reversed().indices();
        out += p.algebra().word(rev, std::conj(c));
    }
    return out;
}

AffineParts affine_parts(const WeylPoly& p) {
    const std::size_t n = p.algebra().dimension();
    AffineParts out{p.coefficient(Monomial{}), Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(n)),
                    p.part_from_degree(2)};
    for (std::size_t j = 0; j < n; ++j) {
        out.linear(static_cast<Eigen::Index>(j)) = p.coefficient(Monomial{j});
    }
    return out;
}

// -------------------------------------------------------- PolyVector/Matrix

PolyVector::PolyVector(const WeylAlgebra& algebra, std::size_t size)
    : algebra_(algebra), entries_(size, algebra.zero()) {}

double PolyVector::max_abs_coefficient() const noexcept {
    double out = 0.0;
    for (const auto& p : entries_) out = std::max(out, p.max_abs_coefficient());
    return out;
}

bool PolyVector::approx_equal(const PolyVector& other, double tol) const {
    if (size() != other.size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
        if (!entries_[i].approx_equal(other.entries_[i], tol)) return false;
    }
    return true;
}

PolyMatrix::PolyMatrix(const WeylAlgebra& algebra, std::size_t rows, std::size_t cols)
    : algebra_(algebra), rows_(rows), cols_(cols), entries_(rows * cols, algebra.zero()) {}

PolyVector PolyMatrix::column(std::size_t j) const {
    PolyVector out(algebra_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

double PolyMatrix::max_abs_coefficient() const noexcept {
    double out = 0.0;
    for (const auto& p : entries_) out = std::max(out, p.max_abs_coefficient());
    return out;
}

bool PolyMatrix::approx_equal(const PolyMatrix& other, double tol) const {
    if (rows_ != other.rows_ || cols_ != other.cols_) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!entries_[i].approx_equal(other.entries_[i], tol)) return false;
    }
    return true;
}

PolyVector generators(const WeylAlgebra& algebra) {
    PolyVector x(algebra, algebra.dimension());
    for (std::size_t j = 0; j < algebra.dimension(); ++j) x[j] = algebra.generator(j);
    return x;
}

WeylPoly linear_form(const WeylAlgebra& algebra, const Eigen::Ref<const Eigen::VectorXcd>& c) {
    if (static_cast<std::size_t>(c.size()) != algebra.dimension()) {
        throw std::invalid_argument("linear_form: coefficient vector has wrong length");
    }
    WeylPoly out = algebra.zero();
    for (std::size_t j = 0; j < algebra.dimension(); ++j) {
        const Complex cj = c(static_cast<Eigen::Index>(j));
        if (cj != Complex{}) out += algebra.word({j}, cj);
    }
    return out;
}

WeylPoly quadratic_form(const WeylAlgebra& algebra, const Eigen::Ref<const Eigen::MatrixXcd>& q) {
    const auto n = static_cast<Eigen::Index>(algebra.dimension());
    if (q.rows() != n || q.cols() != n) {
        throw std::invalid_argument("quadratic_form: matrix has wrong shape");
    }
    std::vector<RawTerm> raw;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = 0; b < n; ++b) {
            if (q(a, b) != Complex{}) {
                raw.push_back({{static_cast<std::size_t>(a), static_cast<std::size_t>(b)}, q(a, b)});
            }
        }
    }
    return algebra.normalize(raw);
}

}  // namespace quasilin
