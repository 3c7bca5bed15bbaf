#include "gridshare/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "gridshare/errors.hpp"

namespace gridshare {

RecursionBreakdown::RecursionBreakdown(int node, double voltage)
    : Error(fmt::format("Distflow recursion broke down: V_{} = {} <= 0", node, voltage)),
      node_(node),
      voltage_(voltage) {}

std::string_view to_string(PowerFlowModel model) {
    switch (model) {
        case PowerFlowModel::Distflow: return "distflow";
        case PowerFlowModel::LinearizedDistflow: return "linearized";
    }
    return "unknown";
}

PowerFlowModel parse_model(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "distflow" || lower == "d") return PowerFlowModel::Distflow;
    if (lower == "linearized" || lower == "linearized-distflow" || lower == "ld")
        return PowerFlowModel::LinearizedDistflow;
    throw ValidationError(fmt::format("unknown power-flow model '{}'", name));
}

void NetworkConfig::validate() const {
    if (n_stations < 1) throw ValidationError(fmt::format("n_stations must be >= 1, got {}", n_stations));
    if (capacity < 1) throw ValidationError(fmt::format("capacity must be >= 1, got {}", capacity));
    if (!(resistance > 0.0) || !std::isfinite(resistance))
        throw ValidationError(fmt::format("resistance must be > 0, got {}", resistance));
    if (!(delta > 0.0 && delta <= 0.5))
        throw ValidationError(fmt::format("delta must lie in (0, 0.5], got {}", delta));
}

long StateVector::total() const { return std::accumulate(counts.begin(), counts.end(), 0L); }

void StateVector::validate(const NetworkConfig& cfg) const {
    if (counts.size() != cfg.stations())
        throw ValidationError(
            fmt::format("state has {} entries, network has {} stations", counts.size(), cfg.n_stations));
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] < 0 || counts[j] > cfg.capacity)
            throw ValidationError(fmt::format("X_{} = {} outside [0, {}]", j + 1, counts[j], cfg.capacity));
    }
}

std::size_t StateVectorHash::operator()(const StateVector& x) const noexcept {
    std::size_t h = 1469598103934665603ULL;
    for (int c : x.counts) {
        h ^= static_cast<std::size_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

}  // namespace gridshare
