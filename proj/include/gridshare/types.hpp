#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gridshare {

enum class PowerFlowModel { Distflow, LinearizedDistflow };

std::string_view to_string(PowerFlowModel model);

/// Accepts "distflow"/"d" and "linearized"/"linearized-distflow"/"ld" (case-insensitive).
PowerFlowModel parse_model(std::string_view name);

/// Absolute slack applied to both feasibility constraints.
inline constexpr double kFeasibilityTolerance = 1e-9;

/// Line network with stations 1..N hanging off nodes 1..N; node 0 is the root.
struct NetworkConfig {
    int n_stations = 2;
    double resistance = 0.1;  ///< per-unit, identical on every edge
    double delta = 0.05;      ///< admissible relative voltage drop, in (0, 0.5]
    int capacity = 100;       ///< parking spaces per lot
    PowerFlowModel model = PowerFlowModel::Distflow;

    /// Throws ValidationError when an invariant is violated.
    void validate() const;

    /// Upper bound on the root voltage when the far node sits at 1 p.u.
    double root_voltage_limit() const { return 1.0 / (1.0 - delta); }

    std::size_t stations() const { return static_cast<std::size_t>(n_stations); }
};

/// Active power drawn at each station, p[0] belonging to station 1.
struct AllocationVector {
    std::vector<double> power;

    AllocationVector() = default;
    explicit AllocationVector(std::vector<double> p) : power(std::move(p)) {}
    explicit AllocationVector(std::size_t n) : power(n, 0.0) {}

    std::size_t size() const { return power.size(); }
    double operator[](std::size_t i) const { return power[i]; }
    double& operator[](std::size_t i) { return power[i]; }
    bool operator==(const AllocationVector&) const = default;
};

/// Number of EVs at each lot.
struct StateVector {
    std::vector<int> counts;

    StateVector() = default;
    explicit StateVector(std::vector<int> c) : counts(std::move(c)) {}

    std::size_t size() const { return counts.size(); }
    int operator[](std::size_t i) const { return counts[i]; }
    int& operator[](std::size_t i) { return counts[i]; }
    long total() const;
    bool operator==(const StateVector&) const = default;

    /// Throws ValidationError unless 0 <= X_j <= K and the length matches.
    void validate(const NetworkConfig& cfg) const;
};

struct StateVectorHash {
    std::size_t operator()(const StateVector& x) const noexcept;
};

/// Node voltages V_0..V_N.
struct VoltageProfile {
    std::vector<double> voltages;

    double root() const { return voltages.front(); }
    std::size_t size() const { return voltages.size(); }
    double operator[](std::size_t i) const { return voltages[i]; }
};

/// Real-valued flow on edge (j-1, j).
struct BranchFlow {
    double current = 0.0;
    double sending_power = 0.0;
};

}  // namespace gridshare
