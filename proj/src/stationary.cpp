#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "gridshare/errors.hpp"
#include "gridshare/kernels.hpp"
#include "gridshare/markov.hpp"

namespace gridshare::markov {

// The direct method fixes pi(pin) = 1, drops that balance equation, solves the
// sparse (n-1) x (n-1) system and normalises.
struct StationarySolver::Direct {
    using Matrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
    using LU = Eigen::SparseLU<Matrix, Eigen::COLAMDOrdering<int>>;
    std::map<std::size_t, std::unique_ptr<LU>> factorisations;  // keyed by pinned state
};

StationarySolver::StationarySolver(DepartureTable table, StationaryOptions options)
    : table_(std::move(table)), options_(options), direct_(std::make_unique<Direct>()) {}
StationarySolver::~StationarySolver() = default;
StationarySolver::StationarySolver(StationarySolver&&) noexcept = default;
StationarySolver& StationarySolver::operator=(StationarySolver&&) noexcept = default;

namespace {

kernels::GeneratorView view_of(const ArrivalSpec& arrivals, const DepartureTable& table,
                               const std::vector<double>& exit) {
    return {static_cast<std::size_t>(table.space.stations()), static_cast<std::size_t>(table.space.capacity()),
            arrivals.rates, table.rates, exit};
}

void normalise(std::vector<double>& pi) {
    for (double& v : pi) v = std::max(v, 0.0);
    double sum = 0.0;
    for (double v : pi) sum += v;
    for (double& v : pi) v /= sum;
}

}  // namespace

double generator_residual(const std::vector<double>& pi, const ArrivalSpec& arrivals, const DepartureTable& table) {
    const std::vector<double> exit = exit_rates(arrivals, table);
    std::vector<double> out(pi.size());
    const auto& k = kernels::active_kernels();
    k.generator_apply(view_of(arrivals, table, exit), pi, out);
    return k.max_abs(out);
}

StationaryDistribution StationarySolver::solve(const ArrivalSpec& arrivals) {
    arrivals.validate(table_.config);
    const std::size_t states = table_.space.size();
    if (states > options_.max_states)
        throw SizeLimitError(fmt::format("{} states exceed the exact-solver limit of {}", states, options_.max_states));
    if (states == 1) return {table_.space, {1.0}, 0.0, "banded"};

    using Method = StationaryOptions::Method;
    Method method = options_.method;
    if (method == Method::Auto) {
        const double band = static_cast<double>(table_.space.stride(table_.space.stations() - 1));
        if (static_cast<double>(states) * band * band <= options_.banded_work_limit)
            method = Method::Banded;
        else
            method = states <= options_.direct_limit ? Method::Direct : Method::Iterative;
    }
    if (method == Method::Iterative) return solve_iterative(arrivals);
    if (method == Method::Direct) return solve_direct(arrivals);

    std::vector<double> pi = solve_banded(arrivals);
    const double residual = generator_residual(pi, arrivals, table_);
    if (!(residual <= options_.residual_tolerance))
        throw ConvergenceError(fmt::format("stationary residual {:.3e} exceeds {:.1e}", residual,
                                           options_.residual_tolerance),
                               residual);
    return {table_.space, std::move(pi), residual, "banded"};
}

// Grassmann-Taksar-Heyman elimination. States are removed from the highest
// index down; removing state n censors the chain onto {0..n-1} and only
// touches pairs within one bandwidth (the stride of the last lot) of n, so the
// band never fills outside itself. Every update adds nonnegative terms, which
// keeps full relative accuracy even when probabilities span many decades.
std::vector<double> StationarySolver::solve_banded(const ArrivalSpec& arrivals) const {
    const StateSpace& space = table_.space;
    const std::size_t states = space.size();
    const std::size_t n = static_cast<std::size_t>(space.stations());
    const int capacity = space.capacity();
    const std::size_t w = space.stride(n - 1);
    const std::size_t width = 2 * w + 1;

    // rate(i, j) lives at band[i * width + (j + w - i)].
    std::vector<double> band(states * width, 0.0);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return band[i * width + (j + w - i)]; };
    for (std::size_t s = 0; s < states; ++s) {
        for (std::size_t j = 0; j < n; ++j) {
            const int c = space.coordinate(s, j);
            if (c < capacity) at(s, s + space.stride(j)) += arrivals.rates[j];
            if (c > 0) at(s, s - space.stride(j)) += table_.rate(j, s);
        }
    }

    const auto& k = kernels::active_kernels();
    for (std::size_t m = states - 1; m > 0; --m) {
        const std::size_t lo = m > w ? m - w : 0;
        const std::size_t len = m - lo;
        double out = 0.0;
        for (std::size_t j = lo; j < m; ++j) out += at(m, j);
        // Occupied states always reach a lower index through a departure.
        if (!(out > 0.0))
            throw ConvergenceError(fmt::format("state {} has no path towards the empty state", m),
                                   std::numeric_limits<double>::infinity());
        const std::span<const double> pivot_row(&at(m, lo), len);
        for (std::size_t i = lo; i < m; ++i) {
            double& link = at(i, m);
            if (link == 0.0) continue;
            link /= out;
            // The diagonal slot of row i also receives an update; it is never read.
            k.axpy(link, pivot_row, std::span<double>(&at(i, lo), len));
        }
    }

    std::vector<double> pi(states, 0.0);
    pi[0] = 1.0;
    for (std::size_t j = 1; j < states; ++j) {
        const std::size_t lo = j > w ? j - w : 0;
        double v = 0.0;
        for (std::size_t i = lo; i < j; ++i) v += pi[i] * at(i, j);
        pi[j] = v;
        if (v > 1e250)
            for (std::size_t i = 0; i <= j; ++i) pi[i] *= 1e-250;
    }
    normalise(pi);
    return pi;
}

StationaryDistribution StationarySolver::solve_direct(const ArrivalSpec& arrivals) {
    // First pass pins the empty state. When the mass sits far from it (heavy
    // load) that pin is numerically poor, so a second pass pins the most
    // probable state of the first solution.
    std::vector<double> pi = solve_pinned(arrivals, 0);
    double residual = generator_residual(pi, arrivals, table_);
    if (!(residual <= options_.residual_tolerance)) {
        const auto mode = static_cast<std::size_t>(std::max_element(pi.begin(), pi.end()) - pi.begin());
        if (mode != 0) {
            pi = solve_pinned(arrivals, mode);
            residual = generator_residual(pi, arrivals, table_);
        }
    }
    if (!(residual <= options_.residual_tolerance))
        throw ConvergenceError(fmt::format("stationary residual {:.3e} exceeds {:.1e}", residual,
                                           options_.residual_tolerance),
                               residual);
    return {table_.space, std::move(pi), residual, "direct"};
}

std::vector<double> StationarySolver::solve_pinned(const ArrivalSpec& arrivals, std::size_t pin) {
    const StateSpace& space = table_.space;
    const std::size_t states = space.size();
    const std::size_t n = static_cast<std::size_t>(space.stations());
    const int capacity = space.capacity();
    const std::vector<double> exit = exit_rates(arrivals, table_);

    // Unknowns and equations are all states except `pin`, whose probability is
    // fixed at 1. Column s holds the rates out of state s, row t the balance of
    // state t.
    auto reduced = [pin](std::size_t s) { return static_cast<int>(s < pin ? s : s - 1); };
    using Triplet = Eigen::Triplet<double, int>;
    std::vector<Triplet> entries;
    entries.reserve(states * (2 * n + 1));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states - 1));
    auto add = [&](std::size_t from, std::size_t to, double rate) {
        if (to == pin) return;
        if (from == pin)
            rhs[reduced(to)] -= rate;
        else
            entries.emplace_back(reduced(to), reduced(from), rate);
    };
    for (std::size_t s = 0; s < states; ++s) {
        add(s, s, -exit[s]);
        for (std::size_t j = 0; j < n; ++j) {
            const int c = space.coordinate(s, j);
            // Explicit entries even when the rate is zero keep the sparsity
            // pattern independent of the arrival rates.
            if (c < capacity) add(s, s + space.stride(j), arrivals.rates[j]);
            if (c > 0) add(s, s - space.stride(j), table_.rate(j, s));
        }
    }
    Direct::Matrix a(static_cast<Eigen::Index>(states - 1), static_cast<Eigen::Index>(states - 1));
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();

    auto& lu = direct_->factorisations[pin];
    if (!lu) {
        lu = std::make_unique<Direct::LU>();
        lu->analyzePattern(a);
    }
    lu->factorize(a);
    if (lu->info() != Eigen::Success)
        throw ConvergenceError(fmt::format("sparse LU factorisation failed: {}", lu->lastErrorMessage()),
                               std::numeric_limits<double>::infinity());

    Eigen::VectorXd x = lu->solve(rhs);
    for (int round = 0; round < 2; ++round) {
        const Eigen::VectorXd r = rhs - a * x;
        x += lu->solve(r);
    }

    std::vector<double> pi(states);
    for (std::size_t s = 0; s < states; ++s) pi[s] = s == pin ? 1.0 : x[reduced(s)];
    normalise(pi);
    return pi;
}

StationaryDistribution StationarySolver::solve_iterative(const ArrivalSpec& arrivals) {
    // Power iteration on the uniformised chain P = I + Q / u.
    const std::size_t states = table_.space.size();
    const std::vector<double> exit = exit_rates(arrivals, table_);
    const double u = 1.0001 * std::max(*std::max_element(exit.begin(), exit.end()), 1e-300);
    const auto view = view_of(arrivals, table_, exit);
    const auto& k = kernels::active_kernels();

    std::vector<double> pi(states, 1.0 / static_cast<double>(states));
    std::vector<double> flow(states);
    double residual = std::numeric_limits<double>::infinity();
    for (long it = 0; it < options_.max_iterations; ++it) {
        k.generator_apply(view, pi, flow);
        residual = k.max_abs(flow);
        if (residual <= options_.residual_tolerance) return {table_.space, std::move(pi), residual, "iterative"};
        for (std::size_t s = 0; s < states; ++s) pi[s] += flow[s] / u;
        if (it % 64 == 63) normalise(pi);
    }
    throw ConvergenceError(fmt::format("uniformised power iteration stalled at residual {:.3e} after {} iterations",
                                       residual, options_.max_iterations),
                           residual);
}

StationaryDistribution stationary_distribution(const ArrivalSpec& arrivals, const NetworkConfig& cfg,
                                               const StationaryOptions& options) {
    cfg.validate();
    arrivals.validate(cfg);
    const std::size_t states = StateSpace::count(cfg.n_stations, cfg.capacity);
    if (states > options.max_states)
        throw SizeLimitError(fmt::format("{} states exceed the exact-solver limit of {}", states, options.max_states));
    StationarySolver solver(DepartureTable::build(allocator::Allocator(cfg)), options);
    return solver.solve(arrivals);
}

SimulationResult exact_metrics(const StationaryDistribution& pi, const ArrivalSpec& arrivals, const NetworkConfig& cfg) {
    arrivals.validate(cfg);
    const std::size_t n = cfg.stations();
    SimulationResult result;
    result.exact = true;
    result.lots.resize(n);
    const StateSpace& space = pi.space;
    std::vector<double> full(n, 0.0);
    for (std::size_t s = 0; s < space.size(); ++s) {
        const double w = pi.probability[s];
        for (std::size_t j = 0; j < n; ++j) {
            const int c = space.coordinate(s, j);
            result.lots[j].mean_number += w * c;
            if (c == space.capacity()) full[j] += w;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        LotStatistics& lot = result.lots[j];
        lot.blocking = full[j];
        const double throughput = arrivals.rates[j] * (1.0 - full[j]);
        if (throughput > 0.0) lot.mean_time = lot.mean_number / throughput;
        result.total_mean_number += lot.mean_number;
    }
    return result;
}

}  // namespace gridshare::markov
