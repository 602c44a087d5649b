#pragma once

#include <stdexcept>
#include <string>

namespace mklrate {

/// Input coordinate outside the kernel's domain (the unit interval).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid parameter. `field()` names the offending parameter so callers
/// (the CLI in particular) can report it.
class ParameterError : public std::invalid_argument {
public:
    ParameterError(std::string field, const std::string& message)
        : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A documented precondition on a matrix argument does not hold.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Eigensolver / factorization failure.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite objective during a solve.
class DivergedError : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace mklrate
