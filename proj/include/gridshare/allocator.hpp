#pragma once

#include <cstddef>
#include <shared_mutex>
#include <unordered_map>

#include "gridshare/types.hpp"

namespace gridshare::allocator {

/// sum_j X_j log(p_j / X_j); lots with X_j = 0 contribute nothing.
/// Throws ValidationError if p_j <= 0 for an occupied lot.
double pf_objective(const StateVector& x, const AllocationVector& p);

/// Proportional-fair optimum under the linearized constraint (closed form):
/// p_k = (X_k / sum X) * B / (2 r k).
AllocationVector allocate_ld(const StateVector& x, const NetworkConfig& cfg);

struct SolverOptions {
    double kkt_tolerance = 1e-10;      ///< relative spread of X_j / (p_j dV0/dp_j)
    double objective_tolerance = 1e-10;  ///< relative objective change between iterates
    long max_iterations = 100000;
};

struct SolveDiagnostics {
    long iterations = 0;
    double kkt_spread = 0.0;
    double root_voltage = 0.0;
};

/// Proportional-fair optimum under the Distflow voltage limit.
///
/// At the optimum the voltage limit is active and X_j / p_j = mu * dV0/dp_j on
/// the occupied lots. The solver iterates that stationarity condition: the
/// direction X_j / (dV0/dp_j) at the current point is pushed back onto the
/// boundary with max_feasible_scale, with geometric damping whenever the
/// objective fails to improve. It starts from the linearized optimum projected
/// onto the Distflow boundary. Throws SolverError (with the best iterate) if
/// the tolerances are not met within the budget.
AllocationVector allocate_distflow(const StateVector& x, const NetworkConfig& cfg,
                                   const SolverOptions& options = {},
                                   SolveDiagnostics* diagnostics = nullptr);

/// Brute-force reference: enumerate directions on the nonnegative unit sphere
/// (restricted to occupied lots) on a midpoint grid with `angular_resolution`
/// cells per angle, push each onto the boundary and keep the best objective.
/// `refinements` extra passes re-grid a shrinking window around the incumbent.
/// Only N in {2, 3} and a nonempty state are accepted.
AllocationVector oracle_boundary_allocate(const StateVector& x, const NetworkConfig& cfg,
                                          int angular_resolution, int refinements = 0);

/// Dispatch on cfg.model, no caching.
AllocationVector allocate(const StateVector& x, const NetworkConfig& cfg);

/// Memoising front end. The state space is finite, so the cache is unbounded.
/// Concurrent callers are fine: a state may be solved twice in a race, but the
/// solver is deterministic, so both fills store the same vector.
class Allocator {
public:
    explicit Allocator(NetworkConfig cfg);

    AllocationVector allocate(const StateVector& x) const;

    const NetworkConfig& config() const { return cfg_; }
    std::size_t cache_size() const;

private:
    NetworkConfig cfg_;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<StateVector, AllocationVector, StateVectorHash> cache_;
};

}  // namespace gridshare::allocator
