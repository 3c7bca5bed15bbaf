#include "gridshare/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <tuple>
#include <thread>

#include <fmt/format.h>

#include "gridshare/errors.hpp"

namespace gridshare::experiments {

std::string_view to_string(Method method) {
    switch (method) {
        case Method::Exact: return "exact";
        case Method::Simulation: return "sim";
        case Method::Auto: return "auto";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    if (name == "exact") return Method::Exact;
    if (name == "sim" || name == "simulation") return Method::Simulation;
    if (name == "auto") return Method::Auto;
    throw ValidationError(fmt::format("unknown method '{}' (expected exact, sim or auto)", name));
}

std::string_view to_string(RateAxis axis) { return axis == RateAxis::PerLot ? "per-lot" : "total"; }

Method resolve_method(Method method, const NetworkConfig& cfg) {
    if (method != Method::Auto) return method;
    return markov::StateSpace::count(cfg.n_stations, cfg.capacity) <= kExactStateLimit ? Method::Exact
                                                                                         : Method::Simulation;
}

std::vector<double> arithmetic_grid(double first, double last, double step) {
    if (!(step > 0.0)) throw ValidationError("grid step must be positive");
    if (last < first) throw ValidationError("grid end precedes its start");
    const auto count = static_cast<long>(std::floor((last - first) / step + 1e-3)) + 1;
    std::vector<double> grid(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        // Round to 12 decimals so that 0.02 + 36 * 0.005 prints as 0.2.
        grid[static_cast<std::size_t>(i)] = std::round((first + static_cast<double>(i) * step) * 1e12) / 1e12;
    }
    return grid;
}

namespace {

// Runs task(worker, i) for i in [0, count) on up to `threads` workers.
void parallel_for(std::size_t count, int threads, const std::function<void(int, std::size_t)>& task) {
    const int workers = static_cast<int>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, std::max<std::size_t>(count, 1)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) task(0, i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(w, i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void require_increasing(const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("rate grid is empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1])) throw ValidationError("rate grid must be strictly increasing");
}

}  // namespace

SweepTable run_sweep(const std::vector<double>& rate_grid, const std::vector<double>& fractions, RateAxis axis,
                     const NetworkConfig& cfg, const markov::SimulationConfig& sim, Method method, int threads) {
    cfg.validate();
    require_increasing(rate_grid);
    if (fractions.size() != cfg.stations())
        throw ValidationError(fmt::format("{} fractions for {} stations", fractions.size(), cfg.n_stations));
    const Method resolved = resolve_method(method, cfg);
    if (resolved == Method::Simulation) sim.validate();

    SweepTable table;
    table.axis = axis;
    table.rows.resize(rate_grid.size());
    for (std::size_t i = 0; i < rate_grid.size(); ++i) {
        SweepRow& row = table.rows[i];
        row.model = cfg.model;
        row.method = resolved;
        row.rate = rate_grid[i];
        row.total_rate = axis == RateAxis::PerLot ? rate_grid[i] * cfg.n_stations : rate_grid[i];
        row.fractions = fractions;
        row.sim = sim;
        try {
            row.lambda = markov::ArrivalSpec::from_total(row.total_rate, fractions).rates;
        } catch (const Error& e) {
            row.error = e.what();
        }
    }

    const allocator::Allocator allocator(cfg);
    const int workers = std::max(threads, 1);
    if (resolved == Method::Exact) {
        std::optional<markov::DepartureTable> departures;
        std::string table_error;
        const std::size_t states = markov::StateSpace::count(cfg.n_stations, cfg.capacity);
        const std::size_t limit = markov::StationaryOptions{}.max_states;
        if (states > limit) {
            table_error = fmt::format("{} states exceed the exact-solver limit of {}", states, limit);
        } else {
            try {
                departures.emplace(markov::DepartureTable::build(allocator));
            } catch (const Error& e) {
                table_error = e.what();
            }
        }
        if (!departures) {
            for (auto& row : table.rows)
                if (row.error.empty()) row.error = table_error;
            return table;
        }
        std::vector<std::optional<markov::StationarySolver>> solvers(static_cast<std::size_t>(workers));
        parallel_for(table.rows.size(), workers, [&](int w, std::size_t i) {
            SweepRow& row = table.rows[i];
            if (!row.error.empty()) return;
            auto& solver = solvers[static_cast<std::size_t>(w)];
            if (!solver) solver.emplace(*departures);
            try {
                const markov::ArrivalSpec arrivals(row.lambda);
                row.result = markov::exact_metrics(solver->solve(arrivals), arrivals, cfg);
            } catch (const Error& e) {
                row.error = e.what();
            }
        });
    } else {
        parallel_for(table.rows.size(), workers, [&](int, std::size_t i) {
            SweepRow& row = table.rows[i];
            if (!row.error.empty()) return;
            try {
                row.result = markov::simulate(markov::ArrivalSpec(row.lambda), allocator, sim);
            } catch (const Error& e) {
                row.error = e.what();
            }
        });
    }
    return table;
}

CriticalEstimate estimate_critical_rate(const SweepTable& table, PowerFlowModel model) {
    std::vector<std::pair<double, double>> points;
    for (const auto& row : table.rows)
        if (row.model == model && row.ok()) points.emplace_back(row.rate, row.result->total_mean_number);
    if (points.size() < 3)
        throw ValidationError(fmt::format("critical-rate estimate needs >= 3 points for {}, got {}",
                                          to_string(model), points.size()));
    std::sort(points.begin(), points.end());

    std::vector<double> jumps(points.size() - 1);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) jumps[i] = std::fabs(points[i + 1].second - points[i].second);
    const double largest = *std::max_element(jumps.begin(), jumps.end());
    const double tol = 1e-9 * std::max(largest, 1e-300);

    CriticalEstimate est;
    est.max_jump = largest;
    std::size_t tied_pairs = 0;
    for (std::size_t i = 0; i < jumps.size(); ++i) {
        if (largest - jumps[i] <= tol) {
            est.candidates.push_back(0.5 * (points[i].first + points[i + 1].first));
            ++tied_pairs;
        }
    }
    est.rate = est.candidates.back();
    est.tied = tied_pairs > 1;
    est.no_explosion = tied_pairs == jumps.size();
    return est;
}

std::vector<RelativeDifferencePoint> relative_difference_curve(const SweepTable& distflow,
                                                               const SweepTable& linearized) {
    auto select = [](const SweepTable& t, PowerFlowModel m) {
        std::vector<const SweepRow*> rows;
        for (const auto& row : t.rows)
            if (row.model == m) rows.push_back(&row);
        return rows;
    };
    const auto d = select(distflow, PowerFlowModel::Distflow);
    const auto ld = select(linearized, PowerFlowModel::LinearizedDistflow);
    if (d.size() != ld.size()) throw ValidationError("relative difference needs identical rate grids");
    std::vector<RelativeDifferencePoint> curve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (std::fabs(d[i]->rate - ld[i]->rate) > 1e-12 || d[i]->fractions != ld[i]->fractions)
            throw ValidationError(fmt::format("rate grids differ at point {}", i));
        curve[i].rate = d[i]->rate;
        curve[i].total_rate = d[i]->total_rate;
        if (!d[i]->ok() || !ld[i]->ok()) continue;
        const double denom = d[i]->result->total_mean_number;
        if (denom == 0.0) continue;
        curve[i].percent = 100.0 * (denom - ld[i]->result->total_mean_number) / denom;
    }
    return curve;
}

HeatmapTable run_heatmap(const std::vector<double>& total_rates, const std::vector<double>& fractions_1,
                         const NetworkConfig& cfg, const markov::SimulationConfig& sim, Method method, int threads) {
    cfg.validate();
    if (cfg.n_stations != 2) throw ValidationError("heat maps are defined for two-lot networks");
    if (total_rates.empty() || fractions_1.empty()) throw ValidationError("heat-map grids must be nonempty");
    for (double f : fractions_1)
        if (!(f >= 0.0 && f <= 1.0)) throw ValidationError(fmt::format("fraction {} outside [0, 1]", f));

    HeatmapTable table;
    for (double f : fractions_1) {
        // Sort-and-dedupe the total grid so each column can run as one sweep.
        std::vector<double> grid = total_rates;
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        const SweepTable sweep = run_sweep(grid, {f, 1.0 - f}, RateAxis::Total, cfg, sim, method, threads);
        for (const auto& row : sweep.rows) {
            HeatmapRow cell;
            cell.model = cfg.model;
            cell.total_rate = row.total_rate;
            cell.fraction_1 = f;
            if (row.ok()) {
                cell.total_mean_number = row.result->total_mean_number;
                cell.ci = row.result->exact ? 0.0 : row.result->total_mean_number_ci;
            } else {
                cell.error = row.error;
            }
            table.rows.push_back(std::move(cell));
        }
    }
    std::stable_sort(table.rows.begin(), table.rows.end(), [](const HeatmapRow& a, const HeatmapRow& b) {
        return std::tie(a.total_rate, a.fraction_1) < std::tie(b.total_rate, b.fraction_1);
    });
    return table;
}

std::vector<CriticalRow> scan_critical_rates(const std::vector<double>& total_grid,
                                             const std::vector<double>& fractions_1, const NetworkConfig& cfg,
                                             const markov::SimulationConfig& sim, Method method, int threads) {
    cfg.validate();
    if (cfg.n_stations != 2) throw ValidationError("critical-rate scans are defined for two-lot networks");
    require_increasing(total_grid);
    const double step = total_grid.size() > 1 ? total_grid[1] - total_grid[0] : 0.0;
    std::vector<CriticalRow> rows;
    for (double f : fractions_1) {
        CriticalRow row;
        row.model = cfg.model;
        row.fraction_1 = f;
        row.grid_step = step;
        try {
            const SweepTable sweep = run_sweep(total_grid, {f, 1.0 - f}, RateAxis::Total, cfg, sim, method, threads);
            row.estimate = estimate_critical_rate(sweep, cfg.model);
            row.critical_rate = row.estimate.rate;
        } catch (const Error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace gridshare::experiments
