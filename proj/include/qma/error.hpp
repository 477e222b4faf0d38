#pragma once

#include <stdexcept>
#include <string>

namespace qma {

/// Raised when an operation is called outside its mathematical domain
/// (index out of range, degree overflow, mismatched grids, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Raised by iterative procedures that exhaust their budget. Carries the
/// residual reached so callers can report it.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual, long iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DomainError(msg);
}

} // namespace qma
