#include <cstdint>
#include <limits>

#include <fmt/format.h>

#include "gridshare/errors.hpp"
#include "gridshare/markov.hpp"

namespace gridshare::markov {

std::size_t StateSpace::count(int stations, int capacity) {
    std::size_t size = 1;
    const auto side = static_cast<std::size_t>(capacity) + 1;
    for (int j = 0; j < stations; ++j) {
        if (size > std::numeric_limits<std::size_t>::max() / side) return std::numeric_limits<std::size_t>::max();
        size *= side;
    }
    return size;
}

StateSpace::StateSpace(int stations, int capacity) : stations_(stations), capacity_(capacity) {
    if (stations < 1 || capacity < 1) throw ValidationError("state space needs N >= 1 and K >= 1");
    size_ = count(stations, capacity);
    if (size_ == std::numeric_limits<std::size_t>::max())
        throw SizeLimitError(fmt::format("state space (K+1)^N overflows for N={}, K={}", stations, capacity));
    strides_.resize(static_cast<std::size_t>(stations));
    std::size_t stride = 1;
    for (auto& s : strides_) {
        s = stride;
        stride *= static_cast<std::size_t>(capacity) + 1;
    }
}

std::size_t StateSpace::index(const StateVector& x) const {
    if (x.size() != static_cast<std::size_t>(stations_))
        throw ValidationError("state length does not match the state space");
    std::size_t idx = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] < 0 || x[j] > capacity_) throw ValidationError(fmt::format("X_{} = {} out of range", j + 1, x[j]));
        idx += static_cast<std::size_t>(x[j]) * strides_[j];
    }
    return idx;
}

StateVector StateSpace::state(std::size_t index) const {
    StateVector x(std::vector<int>(static_cast<std::size_t>(stations_)));
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = coordinate(index, j);
    return x;
}

}  // namespace gridshare::markov
