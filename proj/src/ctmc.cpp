#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gridshare/errors.hpp"
#include "gridshare/markov.hpp"

namespace gridshare::markov {

ArrivalSpec ArrivalSpec::from_total(double total, const std::vector<double>& fractions) {
    if (!(total >= 0.0)) throw ValidationError(fmt::format("total arrival rate must be >= 0, got {}", total));
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0)) throw ValidationError(fmt::format("arrival fraction {} is negative", f));
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw ValidationError(fmt::format("arrival fractions sum to {}, not 1", sum));
    ArrivalSpec spec;
    spec.rates.reserve(fractions.size());
    for (double f : fractions) spec.rates.push_back(f * total);
    return spec;
}

double ArrivalSpec::total() const { return std::accumulate(rates.begin(), rates.end(), 0.0); }

void ArrivalSpec::validate(const NetworkConfig& cfg) const {
    if (rates.size() != cfg.stations())
        throw ValidationError(fmt::format("{} arrival rates for {} stations", rates.size(), cfg.n_stations));
    for (std::size_t j = 0; j < rates.size(); ++j) {
        if (!(rates[j] >= 0.0) || !std::isfinite(rates[j]))
            throw ValidationError(fmt::format("lambda_{} = {} must be finite and >= 0", j + 1, rates[j]));
    }
}

std::vector<Transition> transition_rates(const StateVector& x, const ArrivalSpec& arrivals,
                                         const allocator::Allocator& allocator) {
    const NetworkConfig& cfg = allocator.config();
    x.validate(cfg);
    arrivals.validate(cfg);
    const AllocationVector p = allocator.allocate(x);
    std::vector<Transition> out;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] < cfg.capacity && arrivals.rates[j] > 0.0) {
            StateVector y = x;
            ++y[j];
            out.push_back({std::move(y), arrivals.rates[j]});
        }
    }
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] > 0) {
            StateVector y = x;
            --y[j];
            out.push_back({std::move(y), p[j]});
        }
    }
    return out;
}

std::vector<Transition> transition_rates(const StateVector& x, const ArrivalSpec& arrivals, const NetworkConfig& cfg) {
    return transition_rates(x, arrivals, allocator::Allocator(cfg));
}

DepartureTable DepartureTable::build(const allocator::Allocator& allocator) {
    const NetworkConfig& cfg = allocator.config();
    DepartureTable table{cfg, StateSpace(cfg.n_stations, cfg.capacity), {}};
    const std::size_t states = table.space.size();
    table.rates.assign(cfg.stations() * states, 0.0);
    for (std::size_t s = 0; s < states; ++s) {
        const AllocationVector p = allocator.allocate(table.space.state(s));
        for (std::size_t j = 0; j < cfg.stations(); ++j) table.rates[j * states + s] = p[j];
    }
    return table;
}

std::vector<double> exit_rates(const ArrivalSpec& arrivals, const DepartureTable& table) {
    const std::size_t states = table.space.size();
    const std::size_t n = static_cast<std::size_t>(table.space.stations());
    std::vector<double> exit(states, 0.0);
    for (std::size_t s = 0; s < states; ++s) {
        double q = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (table.space.coordinate(s, j) < table.space.capacity()) q += arrivals.rates[j];
        }
        for (std::size_t j = 0; j < n; ++j) q += table.rates[j * states + s];
        exit[s] = q;
    }
    return exit;
}

}  // namespace gridshare::markov
