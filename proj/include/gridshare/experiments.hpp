#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridshare/markov.hpp"
#include "gridshare/types.hpp"

namespace gridshare::experiments {

enum class Method { Exact, Simulation, Auto };
std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// How a sweep's rate grid is read. PerLot: the grid value is the average
/// per-lot rate, so the total is N * rate. Total: the grid value is the total.
/// Either way lambda_j = fractions_j * total.
enum class RateAxis { PerLot, Total };
std::string_view to_string(RateAxis axis);

/// Largest state space for which Auto picks the exact method.
inline constexpr std::size_t kExactStateLimit = 250000;

Method resolve_method(Method method, const NetworkConfig& cfg);

/// Inclusive arithmetic grid first, first + step, ..., last (to within step/1000).
std::vector<double> arithmetic_grid(double first, double last, double step);

struct SweepRow {
    PowerFlowModel model = PowerFlowModel::Distflow;
    Method method = Method::Exact;  ///< resolved, never Auto
    double rate = 0.0;              ///< value on the table's axis
    double total_rate = 0.0;
    std::vector<double> fractions;
    std::vector<double> lambda;
    markov::SimulationConfig sim;
    std::optional<markov::SimulationResult> result;
    std::string error;  ///< failure marker, empty on success

    bool ok() const { return result.has_value(); }
};

struct SweepTable {
    RateAxis axis = RateAxis::PerLot;
    std::vector<SweepRow> rows;
};

/// Per-lot means for every grid point under cfg.model. A failing point
/// becomes a row with an error marker; the sweep carries on. Simulated points
/// all use sim.seed (common random numbers). Points are spread over up to
/// `threads` workers; the table is identical to a sequential run.
SweepTable run_sweep(const std::vector<double>& rate_grid, const std::vector<double>& fractions, RateAxis axis,
                     const NetworkConfig& cfg, const markov::SimulationConfig& sim, Method method,
                     int threads = 1);

struct CriticalEstimate {
    double rate = 0.0;                ///< midpoint of the pair with the largest jump
    double max_jump = 0.0;
    std::vector<double> candidates;   ///< every tied midpoint (size 1 when unique)
    bool tied = false;
    bool no_explosion = false;        ///< all jumps equal: no knee in the grid
};

/// Max-jump rule on the total mean number of `model`'s successful rows.
/// Ties (relative 1e-9) are reported through `candidates`; the last tied
/// pair is returned as the estimate. Needs >= 3 points.
CriticalEstimate estimate_critical_rate(const SweepTable& table, PowerFlowModel model);

struct RelativeDifferencePoint {
    double rate = 0.0;
    double total_rate = 0.0;
    std::optional<double> percent;  ///< empty when the Distflow total is 0 or a row failed
};

/// 100 (sum E[X]_D - sum E[X]_LD) / sum E[X]_D per grid point. The grids must match.
std::vector<RelativeDifferencePoint> relative_difference_curve(const SweepTable& distflow,
                                                               const SweepTable& linearized);

struct HeatmapRow {
    PowerFlowModel model = PowerFlowModel::Distflow;
    double total_rate = 0.0;
    double fraction_1 = 0.0;
    std::optional<double> total_mean_number;
    double ci = 0.0;
    std::string error;
};

struct HeatmapTable {
    std::vector<HeatmapRow> rows;
};

/// Total mean number for every (total rate, fraction to lot 1) cell of a
/// two-lot network: lambda = (f * total, (1 - f) * total).
HeatmapTable run_heatmap(const std::vector<double>& total_rates, const std::vector<double>& fractions_1,
                         const NetworkConfig& cfg, const markov::SimulationConfig& sim, Method method,
                         int threads = 1);

struct CriticalRow {
    PowerFlowModel model = PowerFlowModel::Distflow;
    double fraction_1 = 0.0;
    std::optional<double> critical_rate;
    double grid_step = 0.0;
    CriticalEstimate estimate;
    std::string error;
};

/// For each fraction to lot 1, sweep the total-rate grid and apply the
/// max-jump rule (two-lot networks).
std::vector<CriticalRow> scan_critical_rates(const std::vector<double>& total_grid,
                                             const std::vector<double>& fractions_1, const NetworkConfig& cfg,
                                             const markov::SimulationConfig& sim, Method method, int threads = 1);

}  // namespace gridshare::experiments
