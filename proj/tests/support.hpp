#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gridshare/types.hpp"

namespace testing {

inline gridshare::NetworkConfig network(int n, gridshare::PowerFlowModel model, int capacity = 100) {
    gridshare::NetworkConfig cfg;
    cfg.n_stations = n;
    cfg.resistance = 0.1;
    cfg.delta = 0.05;
    cfg.capacity = capacity;
    cfg.model = model;
    return cfg;
}

inline gridshare::NetworkConfig distflow(int n, int capacity = 100) {
    return network(n, gridshare::PowerFlowModel::Distflow, capacity);
}

inline gridshare::NetworkConfig linearized(int n, int capacity = 100) {
    return network(n, gridshare::PowerFlowModel::LinearizedDistflow, capacity);
}

inline gridshare::AllocationVector uniform_power(std::mt19937_64& rng, std::size_t n, double hi) {
    std::uniform_real_distribution<double> u(0.0, hi);
    gridshare::AllocationVector p;
    p.power.resize(n);
    for (double& v : p.power) v = u(rng);
    return p;
}

// Random occupancy with at least one EV present.
inline gridshare::StateVector random_state(std::mt19937_64& rng, std::size_t n, int capacity) {
    std::uniform_int_distribution<int> u(0, capacity);
    gridshare::StateVector x;
    x.counts.resize(n);
    do {
        for (int& c : x.counts) c = u(rng);
    } while (x.total() == 0);
    return x;
}

inline gridshare::StateVector state(std::vector<int> counts) {
    gridshare::StateVector x;
    x.counts = std::move(counts);
    return x;
}

inline gridshare::AllocationVector power(std::vector<double> values) {
    gridshare::AllocationVector p;
    p.power = std::move(values);
    return p;
}

}  // namespace testing
