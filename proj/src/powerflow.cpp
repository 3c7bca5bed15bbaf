#include "gridshare/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "gridshare/errors.hpp"
#include "gridshare/kernels.hpp"

namespace gridshare::powerflow {
namespace {

void require_length(const AllocationVector& p, const NetworkConfig& cfg) {
    if (p.size() != cfg.stations())
        throw ValidationError(fmt::format("allocation has {} entries, network has {} stations", p.size(),
                                          cfg.n_stations));
}

void require_nonnegative(const AllocationVector& p) {
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (!(p[j] >= 0.0))
            throw ValidationError(fmt::format("p_{} = {} must be nonnegative", j + 1, p[j]));
    }
}

}  // namespace

VoltageProfile voltage_profile_distflow(const AllocationVector& p, const NetworkConfig& cfg) {
    require_length(p, cfg);
    require_nonnegative(p);
    const std::size_t n = cfg.stations();
    const double r = cfg.resistance;

    VoltageProfile v;
    v.voltages.assign(n + 1, 1.0);
    v.voltages[n - 1] = 1.0 + r * p[n - 1];
    for (std::size_t j = n - 1; j >= 1; --j) {
        if (!(v.voltages[j] > 0.0)) throw RecursionBreakdown(static_cast<int>(j), v.voltages[j]);
        // Same operation order as the batched kernels.
        v.voltages[j - 1] = (2.0 * v.voltages[j] - v.voltages[j + 1]) + (r * p[j - 1]) / v.voltages[j];
    }
    if (!(v.voltages[0] > 0.0)) throw RecursionBreakdown(0, v.voltages[0]);
    return v;
}

double root_voltage(const AllocationVector& p, const NetworkConfig& cfg) {
    return voltage_profile_distflow(p, cfg).root();
}

double root_voltage_gradient(const AllocationVector& p, const NetworkConfig& cfg, std::span<double> gradient) {
    const VoltageProfile v = voltage_profile_distflow(p, cfg);
    const std::size_t n = cfg.stations();
    const double r = cfg.resistance;
    if (gradient.size() != n) throw ValidationError("gradient buffer has the wrong length");

    // adjoint[i] = dV_0 / dV_i, swept in reverse order of the forward recursion.
    std::vector<double> adjoint(n + 1, 0.0);
    adjoint[0] = 1.0;
    std::fill(gradient.begin(), gradient.end(), 0.0);
    for (std::size_t j = 1; j + 1 <= n; ++j) {
        const double a = adjoint[j - 1];
        const double vj = v.voltages[j];
        adjoint[j] += a * (2.0 - r * p[j - 1] / (vj * vj));
        adjoint[j + 1] -= a;
        gradient[j - 1] += a * r / vj;
    }
    gradient[n - 1] += adjoint[n - 1] * r;
    return v.root();
}

double ld_budget(double delta) {
    if (!(delta > 0.0 && delta <= 0.5))
        throw ValidationError(fmt::format("delta must lie in (0, 0.5], got {}", delta));
    const double q = 1.0 - delta;
    return delta * (2.0 - delta) / (q * q);
}

double ld_budget(const NetworkConfig& cfg) { return ld_budget(cfg.delta); }

double ld_constraint_lhs(const AllocationVector& p, const NetworkConfig& cfg) {
    require_length(p, cfg);
    require_nonnegative(p);
    double sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) sum += ld_coefficient(cfg, k + 1) * p[k];
    return sum;
}

FeasibilityReport check_feasibility(const AllocationVector& p, const NetworkConfig& cfg) {
    FeasibilityReport report;
    if (cfg.model == PowerFlowModel::LinearizedDistflow) {
        report.constraint_value = ld_constraint_lhs(p, cfg);
        report.bound = ld_budget(cfg);
    } else {
        report.bound = cfg.root_voltage_limit();
        try {
            report.constraint_value = root_voltage(p, cfg);
        } catch (const RecursionBreakdown& e) {
            report.constraint_value = std::numeric_limits<double>::infinity();
            report.diagnostic = e.what();
            return report;
        }
    }
    report.feasible = report.constraint_value <= report.bound + kFeasibilityTolerance;
    return report;
}

std::vector<BranchFlow> reconstruct_branch_flows(const VoltageProfile& v, const AllocationVector& p,
                                                 const NetworkConfig& cfg) {
    require_length(p, cfg);
    if (v.size() != p.size() + 1)
        throw ValidationError(fmt::format("voltage profile has {} nodes, expected {}", v.size(), p.size() + 1));
    std::vector<BranchFlow> flows(p.size());
    for (std::size_t j = 1; j <= p.size(); ++j) {
        const double current = (v[j - 1] - v[j]) / cfg.resistance;
        flows[j - 1] = {current, v[j - 1] * current};
    }
    return flows;
}

std::vector<double> power_balance_residuals(const std::vector<BranchFlow>& flows, const AllocationVector& p,
                                            const NetworkConfig& cfg) {
    std::vector<double> residual(flows.size());
    for (std::size_t j = 0; j < flows.size(); ++j) {
        const double downstream = j + 1 < flows.size() ? flows[j + 1].sending_power : 0.0;
        const double loss = cfg.resistance * flows[j].current * flows[j].current;
        residual[j] = flows[j].sending_power - loss - p[j] - downstream;
    }
    return residual;
}

namespace {

bool distflow_feasible(double root, double limit) {
    return !std::isnan(root) && root <= limit + kFeasibilityTolerance;
}

double scaled_root(const AllocationVector& d, double t, const NetworkConfig& cfg) {
    AllocationVector p(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) p[j] = t * d[j];
    try {
        return root_voltage(p, cfg);
    } catch (const RecursionBreakdown&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void require_direction(const AllocationVector& d, const NetworkConfig& cfg) {
    require_length(d, cfg);
    require_nonnegative(d);
    if (std::all_of(d.power.begin(), d.power.end(), [](double x) { return x == 0.0; }))
        throw ValidationError("max_feasible_scale: direction must not be zero");
}

// Starting upper bracket: the linearized budget is never smaller than the
// Distflow one, so B / lhs(d) (doubled until infeasible) brackets the boundary.
double initial_upper(const AllocationVector& d, const NetworkConfig& cfg) {
    double lhs = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) lhs += ld_coefficient(cfg, k + 1) * d[k];
    return ld_budget(cfg) / lhs;
}

}  // namespace

namespace {

double largest(const AllocationVector& d) { return *std::max_element(d.power.begin(), d.power.end()); }

}  // namespace

double max_feasible_scale(const AllocationVector& direction, const NetworkConfig& cfg) {
    require_direction(direction, cfg);
    if (cfg.model == PowerFlowModel::LinearizedDistflow)
        return ld_budget(cfg) / ld_constraint_lhs(direction, cfg);

    const double limit = cfg.root_voltage_limit();
    const double tolerance = kScaleTolerance / largest(direction);
    double lo = 0.0;
    double hi = initial_upper(direction, cfg);
    while (distflow_feasible(scaled_root(direction, hi, cfg), limit)) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (distflow_feasible(scaled_root(direction, mid, cfg), limit))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

double boundary_scale(const AllocationVector& direction, const NetworkConfig& cfg) {
    double t = max_feasible_scale(direction, cfg);
    if (cfg.model == PowerFlowModel::LinearizedDistflow) return t;
    const double limit = cfg.root_voltage_limit();
    std::vector<double> grad(direction.size());
    AllocationVector p(direction.size());
    for (int step = 0; step < 8; ++step) {
        for (std::size_t j = 0; j < p.size(); ++j) p[j] = t * direction[j];
        root_voltage_gradient(p, cfg, grad);
        double slope = 0.0;
        for (std::size_t j = 0; j < grad.size(); ++j) slope += grad[j] * direction[j];
        const double next = t - (root_voltage(p, cfg) - limit) / slope;
        if (!(slope > 0.0) || next == t) break;
        t = next;
    }
    return t;
}

std::vector<double> root_voltages(std::span<const AllocationVector> allocations, const NetworkConfig& cfg) {
    const std::size_t n = cfg.stations();
    const std::size_t lanes = allocations.size();
    std::vector<double> packed(n * lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        require_length(allocations[l], cfg);
        for (std::size_t j = 0; j < n; ++j) packed[j * lanes + l] = allocations[l][j];
    }
    std::vector<double> roots(lanes);
    if (lanes > 0) kernels::active_kernels().root_voltage(packed, n, lanes, cfg.resistance, roots);
    return roots;
}

std::vector<double> max_feasible_scales_distflow(std::span<const AllocationVector> directions,
                                                 const NetworkConfig& cfg) {
    const std::size_t n = cfg.stations();
    const std::size_t lanes = directions.size();
    const double limit = cfg.root_voltage_limit();
    const auto& kernel = kernels::active_kernels();

    std::vector<double> lo(lanes, 0.0), hi(lanes), mid(lanes), roots(lanes), packed(n * lanes), tolerance(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        require_direction(directions[l], cfg);
        hi[l] = initial_upper(directions[l], cfg);
        tolerance[l] = kScaleTolerance / largest(directions[l]);
    }

    auto evaluate = [&](const std::vector<double>& scale) {
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t l = 0; l < lanes; ++l) packed[j * lanes + l] = scale[l] * directions[l][j];
        kernel.root_voltage(packed, n, lanes, cfg.resistance, roots);
    };

    // Grow brackets until every lane's upper end is infeasible.
    for (bool growing = true; growing;) {
        evaluate(hi);
        growing = false;
        for (std::size_t l = 0; l < lanes; ++l) {
            if (distflow_feasible(roots[l], limit)) {
                lo[l] = hi[l];
                hi[l] *= 2.0;
                growing = true;
            }
        }
    }
    for (;;) {
        bool done = true;
        for (std::size_t l = 0; l < lanes; ++l) {
            mid[l] = 0.5 * (lo[l] + hi[l]);
            done &= !(hi[l] - lo[l] > tolerance[l]);
        }
        if (done) break;
        evaluate(mid);
        for (std::size_t l = 0; l < lanes; ++l) {
            if (!(hi[l] - lo[l] > tolerance[l])) continue;
            if (distflow_feasible(roots[l], limit))
                lo[l] = mid[l];
            else
                hi[l] = mid[l];
        }
    }
    return lo;
}

}  // namespace gridshare::powerflow
