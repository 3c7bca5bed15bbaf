#pragma once

#include <span>
#include <string>
#include <vector>

#include "gridshare/types.hpp"

namespace gridshare::powerflow {

/// Distflow voltages from the far node (V_N = 1) back to the root.
/// Throws RecursionBreakdown if some V_j <= 0 along the way.
VoltageProfile voltage_profile_distflow(const AllocationVector& p, const NetworkConfig& cfg);

/// Root voltage only; same contract as voltage_profile_distflow.
double root_voltage(const AllocationVector& p, const NetworkConfig& cfg);

/// Gradient of V_0 with respect to p, by reverse-mode differentiation of the
/// recursion. Returns V_0.
double root_voltage_gradient(const AllocationVector& p, const NetworkConfig& cfg,
                             std::span<double> gradient);

/// Right-hand side of the linearized constraint, Delta(2 - Delta) / (1 - Delta)^2.
double ld_budget(const NetworkConfig& cfg);
double ld_budget(double delta);

/// 2r * sum_j sum_{k>=j} p_k, i.e. sum_k 2rk * p_k.
double ld_constraint_lhs(const AllocationVector& p, const NetworkConfig& cfg);

/// Coefficient 2rk of p_k in the linearized constraint (k is 1-based).
inline double ld_coefficient(const NetworkConfig& cfg, std::size_t k) {
    return 2.0 * cfg.resistance * static_cast<double>(k);
}

struct FeasibilityReport {
    bool feasible = false;
    double constraint_value = 0.0;  ///< V_0 or the linearized lhs
    double bound = 0.0;             ///< matching upper bound
    std::string diagnostic;         ///< non-empty when the recursion broke down
};

/// Full check under cfg.model, with kFeasibilityTolerance of slack.
FeasibilityReport check_feasibility(const AllocationVector& p, const NetworkConfig& cfg);

inline bool is_feasible(const AllocationVector& p, const NetworkConfig& cfg) {
    return check_feasibility(p, cfg).feasible;
}

/// Edge flows (I_{j-1,j}, S_{j-1,j}) for j = 1..N, recovered from a voltage profile.
std::vector<BranchFlow> reconstruct_branch_flows(const VoltageProfile& v, const AllocationVector& p,
                                                 const NetworkConfig& cfg);

/// Node balance residuals S_{j-1,j} - r I^2 - p_j - S_{j,j+1} for j = 1..N.
std::vector<double> power_balance_residuals(const std::vector<BranchFlow>& flows,
                                            const AllocationVector& p, const NetworkConfig& cfg);

/// Absolute tolerance of the Distflow bisection in max_feasible_scale, measured
/// on the largest entry of t * direction (so on t itself for directions with
/// max_j d_j = 1).
inline constexpr double kScaleTolerance = 1e-10;

/// Largest t >= 0 with t * direction feasible under cfg.model.
/// Linearized: closed form B / lhs(direction). Distflow: bisection.
double max_feasible_scale(const AllocationVector& direction, const NetworkConfig& cfg);

/// The t > 0 with t * direction exactly on the voltage limit (no slack), to
/// rounding. Distflow: Newton steps on V0(t d) from the bisection bracket.
double boundary_scale(const AllocationVector& direction, const NetworkConfig& cfg);

/// Distflow-only batched variant; bisects all directions together using the
/// vectorised root-voltage kernel. Each direction must have N entries.
std::vector<double> max_feasible_scales_distflow(std::span<const AllocationVector> directions,
                                                 const NetworkConfig& cfg);

/// Root voltages for a batch of allocations (NaN where the recursion breaks down).
std::vector<double> root_voltages(std::span<const AllocationVector> allocations,
                                  const NetworkConfig& cfg);

}  // namespace gridshare::powerflow
