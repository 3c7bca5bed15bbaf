#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridshare {

/// Root of all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (out-of-range delta, wrong vector length, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// The Distflow voltage recursion produced a non-positive node voltage.
class RecursionBreakdown : public Error {
public:
    RecursionBreakdown(int node, double voltage);
    int node() const noexcept { return node_; }
    double voltage() const noexcept { return voltage_; }

private:
    int node_;
    double voltage_;
};

/// An iterative solver missed its tolerances within the iteration budget.
/// Carries the best iterate seen so the caller can inspect or reuse it.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::vector<double> best_iterate, double kkt_residual,
                long iterations)
        : Error(what),
          best_iterate_(std::move(best_iterate)),
          kkt_residual_(kkt_residual),
          iterations_(iterations) {}

    const std::vector<double>& best_iterate() const noexcept { return best_iterate_; }
    double kkt_residual() const noexcept { return kkt_residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    std::vector<double> best_iterate_;
    double kkt_residual_;
    long iterations_;
};

/// State space too large for the requested exact method.
class SizeLimitError : public Error {
public:
    using Error::Error;
};

/// Stationary solve did not reach the residual contract.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace gridshare
