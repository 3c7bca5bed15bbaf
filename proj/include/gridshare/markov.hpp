#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridshare/allocator.hpp"
#include "gridshare/types.hpp"

namespace gridshare::markov {

/// Poisson arrival rates per lot.
struct ArrivalSpec {
    std::vector<double> rates;

    ArrivalSpec() = default;
    explicit ArrivalSpec(std::vector<double> r) : rates(std::move(r)) {}

    /// lambda_j = fractions_j * total; fractions must be >= 0 and sum to 1 (within 1e-12).
    static ArrivalSpec from_total(double total, const std::vector<double>& fractions);

    double total() const;
    std::size_t size() const { return rates.size(); }
    void validate(const NetworkConfig& cfg) const;
};

/// Mixed-radix enumeration of {0..K}^N with lot 1 varying fastest.
class StateSpace {
public:
    StateSpace(int stations, int capacity);

    std::size_t size() const { return size_; }
    int stations() const { return stations_; }
    int capacity() const { return capacity_; }
    std::size_t stride(std::size_t lot) const { return strides_[lot]; }

    std::size_t index(const StateVector& x) const;
    StateVector state(std::size_t index) const;
    int coordinate(std::size_t index, std::size_t lot) const {
        return static_cast<int>((index / strides_[lot]) % static_cast<std::size_t>(capacity_ + 1));
    }

    /// Number of states for N lots of capacity K, or SIZE_MAX on overflow.
    static std::size_t count(int stations, int capacity);

private:
    int stations_;
    int capacity_;
    std::size_t size_;
    std::vector<std::size_t> strides_;
};

struct Transition {
    StateVector target;
    double rate = 0.0;
};

/// Outgoing transitions of x: X + e_j at lambda_j when X_j < K, X - e_j at p_j(X) when X_j > 0.
std::vector<Transition> transition_rates(const StateVector& x, const ArrivalSpec& arrivals,
                                         const allocator::Allocator& allocator);
std::vector<Transition> transition_rates(const StateVector& x, const ArrivalSpec& arrivals,
                                         const NetworkConfig& cfg);

/// Allocation of every state, laid out as rates[j * states + s].
/// Independent of the arrival rates, so one table serves a whole sweep.
struct DepartureTable {
    NetworkConfig config;
    StateSpace space;
    std::vector<double> rates;

    static DepartureTable build(const allocator::Allocator& allocator);
    double rate(std::size_t lot, std::size_t state) const { return rates[lot * space.size() + state]; }
};

struct SimulationConfig {
    double horizon = 2e5;
    double burn_in = 2e4;
    std::uint64_t seed = 1;
    int replications = 5;
    int batches = 20;

    void validate() const;
};

struct LotStatistics {
    double mean_number = 0.0;
    double mean_number_ci = 0.0;
    std::optional<double> mean_time;  ///< empty when no EV was accepted (or lambda_j = 0)
    double mean_time_ci = 0.0;
    double blocking = 0.0;
    double blocking_ci = 0.0;
    // Event counts inside the measurement window, summed over replications.
    long arrivals = 0;
    long accepted = 0;
    long blocked = 0;
    long departures = 0;
};

struct SimulationResult {
    std::vector<LotStatistics> lots;
    double total_mean_number = 0.0;
    double total_mean_number_ci = 0.0;
    bool exact = false;
    SimulationConfig sim;         ///< echo; meaningless when exact
    double measured_time = 0.0;   ///< (horizon - burn_in) * replications
};

/// Event-driven simulation of the occupancy chain, starting empty.
///
/// Replication r uses std::mt19937_64 seeded with seed_seq{seed_lo, seed_hi, r}
/// where seed_lo/seed_hi are the low and high 32 bits of the master seed.
/// Holding times are Exp(total rate); an arrival to a full lot is lost; a
/// departure from lot j removes an EV picked uniformly among those present.
/// Statistics cover (burn_in, horizon]; confidence half-widths are 95%
/// Student-t intervals over the pooled equal-length batch means of all
/// replications. Up to `threads` replications run concurrently; the result
/// does not depend on scheduling.
SimulationResult simulate(const ArrivalSpec& arrivals, const allocator::Allocator& allocator,
                          const SimulationConfig& sim, int threads = 1);
SimulationResult simulate(const ArrivalSpec& arrivals, const NetworkConfig& cfg, const SimulationConfig& sim,
                          int threads = 1);

struct StationaryOptions {
    /// Banded: subtraction-free GTH elimination over the band of the last lot.
    /// Direct: sparse LU with one probability pinned. Iterative: uniformised
    /// power iteration. Auto takes Banded while states * bandwidth^2 stays
    /// under banded_work_limit, then Direct up to direct_limit, then Iterative.
    enum class Method { Auto, Banded, Direct, Iterative };
    Method method = Method::Auto;
    double residual_tolerance = 1e-10;
    std::size_t max_states = 1000000;
    double banded_work_limit = 4e9;
    std::size_t direct_limit = 250000;
    long max_iterations = 2000000;
};

struct StationaryDistribution {
    StateSpace space;
    std::vector<double> probability;
    double residual = 0.0;  ///< ||pi Q||_inf
    std::string method;

    double operator()(const StateVector& x) const { return probability[space.index(x)]; }
};

/// Exact solver for the occupancy chain. Holds the departure table and reuses
/// the sparse symbolic analysis across arrival-rate points.
class StationarySolver {
public:
    explicit StationarySolver(DepartureTable table, StationaryOptions options = {});
    ~StationarySolver();
    StationarySolver(StationarySolver&&) noexcept;
    StationarySolver& operator=(StationarySolver&&) noexcept;

    /// Throws SizeLimitError or ConvergenceError.
    StationaryDistribution solve(const ArrivalSpec& arrivals);

    const DepartureTable& table() const { return table_; }

private:
    struct Direct;
    StationaryDistribution solve_iterative(const ArrivalSpec& arrivals);
    StationaryDistribution solve_direct(const ArrivalSpec& arrivals);
    std::vector<double> solve_banded(const ArrivalSpec& arrivals) const;
    std::vector<double> solve_pinned(const ArrivalSpec& arrivals, std::size_t pin);

    DepartureTable table_;
    StationaryOptions options_;
    std::unique_ptr<Direct> direct_;
};

StationaryDistribution stationary_distribution(const ArrivalSpec& arrivals, const NetworkConfig& cfg,
                                               const StationaryOptions& options = {});

/// ||pi Q||_inf using the active kernel table.
double generator_residual(const std::vector<double>& pi, const ArrivalSpec& arrivals, const DepartureTable& table);

/// Exit rate of every state: sum of admissible arrivals plus departures.
std::vector<double> exit_rates(const ArrivalSpec& arrivals, const DepartureTable& table);

/// Means, blocking and Little's-law charging times from a stationary distribution.
/// Confidence half-widths are zero.
SimulationResult exact_metrics(const StationaryDistribution& pi, const ArrivalSpec& arrivals,
                               const NetworkConfig& cfg);

}  // namespace gridshare::markov
