#include "gridshare/allocator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <vector>

#include <fmt/format.h>

#include "gridshare/errors.hpp"
#include "gridshare/powerflow.hpp"

namespace gridshare::allocator {

double pf_objective(const StateVector& x, const AllocationVector& p) {
    if (x.size() != p.size())
        throw ValidationError(fmt::format("state has {} entries, allocation has {}", x.size(), p.size()));
    double value = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] == 0) continue;
        if (!(p[j] > 0.0))
            throw ValidationError(fmt::format("p_{} = {} must be positive where X_{} = {}", j + 1, p[j], j + 1, x[j]));
        value += x[j] * std::log(p[j] / x[j]);
    }
    return value;
}

AllocationVector allocate_ld(const StateVector& x, const NetworkConfig& cfg) {
    cfg.validate();
    x.validate(cfg);
    AllocationVector p(cfg.stations());
    const long total = x.total();
    if (total == 0) return p;
    const double budget = powerflow::ld_budget(cfg);
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (x[k] > 0)
            p[k] = (static_cast<double>(x[k]) / static_cast<double>(total)) * budget / powerflow::ld_coefficient(cfg, k + 1);
    }
    return p;
}

namespace {

struct Iterate {
    AllocationVector p;
    double objective = -std::numeric_limits<double>::infinity();
    double spread = std::numeric_limits<double>::infinity();
};

AllocationVector project_to_boundary(const AllocationVector& direction, const NetworkConfig& cfg) {
    const double t = powerflow::boundary_scale(direction, cfg);
    AllocationVector p(direction.size());
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = t * direction[j];
    return p;
}

// Stationarity direction X_j / dV0/dp_j and the relative spread of the
// multipliers X_j / (p_j dV0/dp_j) at p.
double stationarity(const StateVector& x, const AllocationVector& p, const NetworkConfig& cfg,
                    AllocationVector& direction) {
    std::vector<double> grad(p.size());
    powerflow::root_voltage_gradient(p, cfg, grad);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    int occupied = 0;
    direction = AllocationVector(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (x[j] == 0) continue;
        if (!(grad[j] > 0.0))
            throw SolverError(fmt::format("dV0/dp_{} = {} is not positive", j + 1, grad[j]), p.power,
                              std::numeric_limits<double>::infinity(), 0);
        direction[j] = x[j] / grad[j];
        const double mu = x[j] / (p[j] * grad[j]);
        lo = std::min(lo, mu);
        hi = std::max(hi, mu);
        sum += mu;
        ++occupied;
    }
    return (hi - lo) / (sum / occupied);
}

}  // namespace

AllocationVector allocate_distflow(const StateVector& x, const NetworkConfig& cfg, const SolverOptions& options,
                                   SolveDiagnostics* diagnostics) {
    cfg.validate();
    x.validate(cfg);
    NetworkConfig dcfg = cfg;
    dcfg.model = PowerFlowModel::Distflow;
    if (x.total() == 0) return AllocationVector(cfg.stations());

    Iterate best;
    best.p = project_to_boundary(allocate_ld(x, dcfg), dcfg);
    best.objective = pf_objective(x, best.p);

    AllocationVector target;
    double damping = 1.0;
    long iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        best.spread = stationarity(x, best.p, dcfg, target);
        AllocationVector direction(best.p.size());
        for (std::size_t j = 0; j < direction.size(); ++j) {
            if (x[j] == 0) continue;
            direction[j] = damping == 1.0 ? target[j]
                                          : std::exp((1.0 - damping) * std::log(best.p[j]) + damping * std::log(target[j]));
        }
        Iterate next;
        next.p = project_to_boundary(direction, dcfg);
        next.objective = pf_objective(x, next.p);

        const double change = next.objective - best.objective;
        const double scale = std::max(1.0, std::fabs(best.objective));
        if (change < -options.objective_tolerance * scale) {
            // Overshoot: keep the incumbent and shorten the step.
            damping *= 0.5;
            if (damping < 1e-12) break;
            continue;
        }
        const bool small_change = std::fabs(change) <= options.objective_tolerance * scale;
        best.p = std::move(next.p);
        best.objective = next.objective;
        damping = std::min(1.0, 2.0 * damping);
        if (small_change && best.spread <= options.kkt_tolerance) {
            best.spread = stationarity(x, best.p, dcfg, target);
            if (best.spread <= options.kkt_tolerance) break;
        }
    }

    const double root = powerflow::root_voltage(best.p, dcfg);
    if (diagnostics != nullptr) *diagnostics = {iter, best.spread, root};
    if (best.spread > options.kkt_tolerance) {
        throw SolverError(fmt::format("Distflow allocation did not converge after {} iterations "
                                      "(KKT spread {:.3e}, V0 {:.12f})",
                                      iter, best.spread, root),
                          best.p.power, best.spread, iter);
    }
    return best.p;
}

namespace {

// Candidate directions over the occupied coordinates for one angular window.
struct AngleWindow {
    double lo[2];
    double hi[2];
};

void push_direction(std::vector<AllocationVector>& out, std::vector<std::array<double, 2>>& angles,
                    const std::vector<std::size_t>& support, std::size_t n, double a, double b) {
    AllocationVector d(n);
    if (support.size() == 2) {
        d[support[0]] = std::cos(a);
        d[support[1]] = std::sin(a);
    } else {
        d[support[0]] = std::sin(a) * std::cos(b);
        d[support[1]] = std::sin(a) * std::sin(b);
        d[support[2]] = std::cos(a);
    }
    out.push_back(std::move(d));
    angles.push_back({a, b});
}

}  // namespace

AllocationVector oracle_boundary_allocate(const StateVector& x, const NetworkConfig& cfg, int angular_resolution,
                                          int refinements) {
    cfg.validate();
    x.validate(cfg);
    if (cfg.n_stations < 2 || cfg.n_stations > 3)
        throw ValidationError(fmt::format("boundary oracle supports N in {{2, 3}}, got {}", cfg.n_stations));
    if (x.total() == 0) throw ValidationError("boundary oracle needs a nonempty state");
    if (angular_resolution < 2) throw ValidationError("angular resolution must be >= 2");

    const std::size_t n = cfg.stations();
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < n; ++j)
        if (x[j] > 0) support.push_back(j);

    auto scales_for = [&](const std::vector<AllocationVector>& dirs) {
        if (cfg.model == PowerFlowModel::Distflow) return powerflow::max_feasible_scales_distflow(dirs, cfg);
        std::vector<double> t(dirs.size());
        for (std::size_t i = 0; i < dirs.size(); ++i) t[i] = powerflow::max_feasible_scale(dirs[i], cfg);
        return t;
    };

    if (support.size() == 1) {
        AllocationVector axis(n);
        axis[support[0]] = 1.0;
        return project_to_boundary(axis, cfg);
    }

    constexpr double quarter = std::numbers::pi / 2.0;
    const int dims = support.size() == 2 ? 1 : 2;
    AngleWindow window{{0.0, 0.0}, {quarter, quarter}};
    AllocationVector best;
    double best_objective = -std::numeric_limits<double>::infinity();
    std::array<double, 2> best_angles{};

    for (int pass = 0; pass <= refinements; ++pass) {
        const double step_a = (window.hi[0] - window.lo[0]) / angular_resolution;
        const double step_b = (window.hi[1] - window.lo[1]) / angular_resolution;
        std::vector<AllocationVector> dirs;
        std::vector<std::array<double, 2>> angles;
        const int outer = angular_resolution;
        const int inner = dims == 2 ? angular_resolution : 1;
        for (int i = 0; i < outer; ++i) {
            for (int k = 0; k < inner; ++k) {
                const double a = window.lo[0] + (i + 0.5) * step_a;
                const double b = window.lo[1] + (k + 0.5) * step_b;
                push_direction(dirs, angles, support, n, a, b);
            }
            // Flush in blocks to bound memory for fine 3-D grids.
            if (dirs.size() >= 8192 || i + 1 == outer) {
                const std::vector<double> t = scales_for(dirs);
                for (std::size_t c = 0; c < dirs.size(); ++c) {
                    AllocationVector p(n);
                    bool positive = true;
                    for (std::size_t j : support) {
                        p[j] = t[c] * dirs[c][j];
                        positive &= p[j] > 0.0;
                    }
                    if (!positive) continue;
                    const double value = pf_objective(x, p);
                    if (value > best_objective) {
                        best_objective = value;
                        best = std::move(p);
                        best_angles = angles[c];
                    }
                }
                dirs.clear();
                angles.clear();
            }
        }
        // Zoom: keep two cells on either side of the incumbent.
        for (int d = 0; d < dims; ++d) {
            const double step = d == 0 ? step_a : step_b;
            window.lo[d] = std::max(0.0, best_angles[d] - 2.0 * step);
            window.hi[d] = std::min(quarter, best_angles[d] + 2.0 * step);
        }
    }
    // Candidates were compared at the bisection tolerance; report the winner on the limit itself.
    return project_to_boundary(best, cfg);
}

AllocationVector allocate(const StateVector& x, const NetworkConfig& cfg) {
    return cfg.model == PowerFlowModel::LinearizedDistflow ? allocate_ld(x, cfg) : allocate_distflow(x, cfg);
}

Allocator::Allocator(NetworkConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

AllocationVector Allocator::allocate(const StateVector& x) const {
    {
        std::shared_lock lock(mutex_);
        if (auto it = cache_.find(x); it != cache_.end()) return it->second;
    }
    AllocationVector p = allocator::allocate(x, cfg_);
    std::unique_lock lock(mutex_);
    return cache_.try_emplace(x, std::move(p)).first->second;
}

std::size_t Allocator::cache_size() const {
    std::shared_lock lock(mutex_);
    return cache_.size();
}

}  // namespace gridshare::allocator
