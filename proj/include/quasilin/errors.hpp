#pragma once

#include <stdexcept>
#include <string>

namespace quasilin {

// Malformed input (bad shapes, asymmetric matrices, out-of-range indices)
// is reported with std::invalid_argument / std::out_of_range. Everything
// below is a well-formed problem that fails for a domain reason.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularCcrError : public DomainError {
public:
    using DomainError::DomainError;
};

class RealizabilityError : public DomainError {
public:
    using DomainError::DomainError;
};

class NotPositiveSemidefinite : public DomainError {
public:
    using DomainError::DomainError;
};

// Drift of the Heisenberg equation still carries degree >= 2 terms.
class NonAffineDrift : public DomainError {
public:
    NonAffineDrift(const std::string& what, double residual_norm)
        : DomainError(what), residual_norm_(residual_norm) {}
    double residual_norm() const noexcept { return residual_norm_; }

private:
    double residual_norm_;
};

// Imaginary parts of A or beta failed to cancel. Indicates an internal bug.
class ComplexDrift : public DomainError {
public:
    ComplexDrift(const std::string& what, double leakage)
        : DomainError(what), leakage_(leakage) {}
    double leakage() const noexcept { return leakage_; }

private:
    double leakage_;
};

class NotStable : public DomainError {
public:
    using DomainError::DomainError;
};

class IntegrationError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace quasilin
