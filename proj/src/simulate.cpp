#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "gridshare/errors.hpp"
#include "gridshare/markov.hpp"

namespace gridshare::markov {

void SimulationConfig::validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon must be positive and finite");
    if (!(burn_in >= 0.0 && burn_in < horizon))
        throw ValidationError(fmt::format("burn_in must satisfy 0 <= burn_in < horizon, got {} / {}", burn_in, horizon));
    if (replications < 1) throw ValidationError("replications must be >= 1");
    if (batches < 2) throw ValidationError("batches must be >= 2");
}

namespace {

struct BatchTally {
    std::vector<double> area;      // integral of X_j
    std::vector<double> sojourn;   // summed sojourn of departures
    std::vector<long> arrivals, blocked, departures;
    double total_area = 0.0;

    explicit BatchTally(std::size_t n) : area(n), sojourn(n), arrivals(n), blocked(n), departures(n) {}
};

struct Replication {
    std::vector<BatchTally> batches;
};

std::mt19937_64 replication_engine(std::uint64_t seed, int replication) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication)};
    return std::mt19937_64(seq);
}

Replication run_replication(const ArrivalSpec& arrivals, const allocator::Allocator& allocator,
                            const SimulationConfig& sim, int replication) {
    const NetworkConfig& cfg = allocator.config();
    const std::size_t n = cfg.stations();
    const int nb = sim.batches;
    const double batch_length = (sim.horizon - sim.burn_in) / nb;

    Replication rep;
    rep.batches.assign(static_cast<std::size_t>(nb), BatchTally(n));

    auto batch_of = [&](double t) -> int {
        if (t <= sim.burn_in || t > sim.horizon) return -1;
        const int b = static_cast<int>((t - sim.burn_in) / batch_length);
        return std::min(b, nb - 1);
    };

    std::mt19937_64 engine = replication_engine(sim.seed, replication);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    StateVector x(std::vector<int>(n, 0));
    std::vector<std::vector<double>> present(n);  // arrival epochs of EVs at each lot
    AllocationVector p = allocator.allocate(x);
    const double lambda_total = arrivals.total();
    double t = 0.0;

    auto accumulate_area = [&](double from, double to) {
        from = std::max(from, sim.burn_in);
        to = std::min(to, sim.horizon);
        while (from < to) {
            const int b = std::min(static_cast<int>((from - sim.burn_in) / batch_length), nb - 1);
            const double end = b == nb - 1 ? to : std::min(to, sim.burn_in + (b + 1) * batch_length);
            BatchTally& tally = rep.batches[static_cast<std::size_t>(b)];
            const double dt = end - from;
            long occupancy = 0;
            for (std::size_t j = 0; j < n; ++j) {
                tally.area[j] += x[j] * dt;
                occupancy += x[j];
            }
            tally.total_area += static_cast<double>(occupancy) * dt;
            from = end;
        }
    };

    for (;;) {
        double rate = lambda_total;
        for (std::size_t j = 0; j < n; ++j) rate += p[j];
        if (!(rate > 0.0)) {
            accumulate_area(t, sim.horizon);
            break;
        }
        const double next = t + std::exponential_distribution<double>(rate)(engine);
        accumulate_area(t, next);
        if (next > sim.horizon) break;
        t = next;
        const int b = batch_of(t);

        double u = unit(engine) * rate;
        std::size_t lot = 0;
        bool arrival = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (u < arrivals.rates[j]) {
                lot = j;
                arrival = true;
                break;
            }
            u -= arrivals.rates[j];
        }
        if (!arrival) {
            lot = n;
            for (std::size_t j = 0; j < n; ++j) {
                if (u < p[j]) {
                    lot = j;
                    break;
                }
                u -= p[j];
            }
            if (lot == n) {
                // Rounding left u just past the last bucket; take the last active lot.
                for (std::size_t j = n; j-- > 0;) {
                    if (p[j] > 0.0) {
                        lot = j;
                        break;
                    }
                }
            }
        }

        if (arrival) {
            if (b >= 0) ++rep.batches[static_cast<std::size_t>(b)].arrivals[lot];
            if (x[lot] >= cfg.capacity) {
                if (b >= 0) ++rep.batches[static_cast<std::size_t>(b)].blocked[lot];
                continue;
            }
            ++x[lot];
            present[lot].push_back(t);
        } else {
            auto& evs = present[lot];
            std::uniform_int_distribution<std::size_t> pick(0, evs.size() - 1);
            const std::size_t k = pick(engine);
            const double sojourn = t - evs[k];
            evs[k] = evs.back();
            evs.pop_back();
            --x[lot];
            if (b >= 0) {
                ++rep.batches[static_cast<std::size_t>(b)].departures[lot];
                rep.batches[static_cast<std::size_t>(b)].sojourn[lot] += sojourn;
            }
        }
        try {
            p = allocator.allocate(x);
        } catch (const Error& e) {
            throw Error(fmt::format("allocation failed in state ({}): {}", fmt::join(x.counts, ","), e.what()));
        }
    }
    return rep;
}

double half_width(const std::vector<double>& samples) {
    const std::size_t m = samples.size();
    if (m < 2) return std::numeric_limits<double>::quiet_NaN();
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(m - 1));
    const boost::math::students_t dist(static_cast<double>(m - 1));
    return boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(static_cast<double>(m));
}

}  // namespace

SimulationResult simulate(const ArrivalSpec& arrivals, const allocator::Allocator& allocator,
                          const SimulationConfig& sim, int threads) {
    const NetworkConfig& cfg = allocator.config();
    arrivals.validate(cfg);
    sim.validate();

    std::vector<Replication> reps(static_cast<std::size_t>(sim.replications));
    const int workers = std::clamp(threads, 1, sim.replications);
    if (workers == 1) {
        for (int r = 0; r < sim.replications; ++r) reps[static_cast<std::size_t>(r)] = run_replication(arrivals, allocator, sim, r);
    } else {
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(sim.replications));
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int r = w; r < sim.replications; r += workers) {
                    try {
                        reps[static_cast<std::size_t>(r)] = run_replication(arrivals, allocator, sim, r);
                    } catch (...) {
                        errors[static_cast<std::size_t>(r)] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    const std::size_t n = cfg.stations();
    const double batch_length = (sim.horizon - sim.burn_in) / sim.batches;
    SimulationResult result;
    result.sim = sim;
    result.measured_time = (sim.horizon - sim.burn_in) * sim.replications;
    result.lots.resize(n);

    std::vector<double> totals;
    double total_area = 0.0;
    for (const auto& rep : reps) {
        for (const auto& tally : rep.batches) {
            totals.push_back(tally.total_area / batch_length);
            total_area += tally.total_area;
        }
    }
    result.total_mean_number = total_area / result.measured_time;
    result.total_mean_number_ci = half_width(totals);

    for (std::size_t j = 0; j < n; ++j) {
        LotStatistics& lot = result.lots[j];
        std::vector<double> numbers, times, blocking;
        double area = 0.0, sojourn = 0.0;
        for (const auto& rep : reps) {
            for (const auto& tally : rep.batches) {
                area += tally.area[j];
                sojourn += tally.sojourn[j];
                lot.arrivals += tally.arrivals[j];
                lot.blocked += tally.blocked[j];
                lot.departures += tally.departures[j];
                numbers.push_back(tally.area[j] / batch_length);
                if (tally.departures[j] > 0) times.push_back(tally.sojourn[j] / static_cast<double>(tally.departures[j]));
                if (tally.arrivals[j] > 0)
                    blocking.push_back(static_cast<double>(tally.blocked[j]) / static_cast<double>(tally.arrivals[j]));
            }
        }
        lot.accepted = lot.arrivals - lot.blocked;
        lot.mean_number = area / result.measured_time;
        lot.mean_number_ci = half_width(numbers);
        if (lot.departures > 0) {
            lot.mean_time = sojourn / static_cast<double>(lot.departures);
            lot.mean_time_ci = half_width(times);
        } else {
            lot.mean_time_ci = std::numeric_limits<double>::quiet_NaN();
        }
        lot.blocking = lot.arrivals > 0 ? static_cast<double>(lot.blocked) / static_cast<double>(lot.arrivals) : 0.0;
        lot.blocking_ci = blocking.size() >= 2 ? half_width(blocking) : 0.0;
    }
    return result;
}

SimulationResult simulate(const ArrivalSpec& arrivals, const NetworkConfig& cfg, const SimulationConfig& sim,
                          int threads) {
    return simulate(arrivals, allocator::Allocator(cfg), sim, threads);
}

}  // namespace gridshare::markov
