#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gridshare/errors.hpp"
#include "gridshare/powerflow.hpp"
#include "support.hpp"

using namespace gridshare;
using namespace gridshare::powerflow;
using testing::power;

TEST_SUITE("powerflow") {

TEST_CASE("two-node profile matches hand evaluation") {
    const auto cfg = testing::distflow(2);
    const VoltageProfile v = voltage_profile_distflow(power({0.3, 0.2}), cfg);
    REQUIRE(v.voltages.size() == 3);
    // V_1 = 1 + r p_2, V_0 = 2 V_1 - V_2 + r p_1 / V_1
    const double v1 = 1.0 + 0.1 * 0.2;
    const double v0 = 2.0 * v1 - 1.0 + 0.1 * 0.3 / v1;
    CHECK(v.voltages[2] == 1.0);
    CHECK(v.voltages[1] == doctest::Approx(v1).epsilon(1e-15));
    CHECK(v.voltages[0] == doctest::Approx(v0).epsilon(1e-15));
    CHECK(v.voltages[0] == doctest::Approx(1.0694118).epsilon(1e-7));
}

TEST_CASE("zero load leaves every voltage at one") {
    for (int n : {1, 2, 5}) {
        const VoltageProfile v = voltage_profile_distflow(AllocationVector{std::vector<double>(n, 0.0)},
                                                          testing::distflow(n));
        for (double x : v.voltages) CHECK(x == 1.0);
    }
}

TEST_CASE("invalid allocations are rejected") {
    const auto cfg = testing::distflow(2);
    CHECK_THROWS_AS(voltage_profile_distflow(power({-0.1, 0.2}), cfg), ValidationError);
    CHECK_THROWS_AS(voltage_profile_distflow(power({0.1}), cfg), ValidationError);
    CHECK_THROWS_AS(ld_budget(0.0), ValidationError);
    CHECK_THROWS_AS(ld_budget(0.6), ValidationError);
}

TEST_CASE("linearized budget and constraint") {
    CHECK(ld_budget(0.05) == doctest::Approx(0.05 * 1.95 / (0.95 * 0.95)).epsilon(1e-15));
    CHECK(ld_budget(0.05) == doctest::Approx(0.1080332).epsilon(1e-7));
    CHECK(ld_budget(0.5) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(ld_budget(1e-12) < 3e-12);

    CHECK(ld_constraint_lhs(power({0.0, 0.0}), testing::linearized(2)) == 0.0);
    CHECK(ld_constraint_lhs(power({0.3, 0.2}), testing::linearized(2)) == doctest::Approx(0.14).epsilon(1e-14));
    CHECK(ld_constraint_lhs(power({1.0}), testing::linearized(1)) == doctest::Approx(0.2).epsilon(1e-15));

    // Double sum over edges against the per-lot coefficient form.
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto cfg = testing::linearized(6);
        const AllocationVector p = testing::uniform_power(rng, 6, 1.0);
        double nested = 0.0;
        for (std::size_t j = 0; j < 6; ++j)
            for (std::size_t k = j; k < 6; ++k) nested += p[k];
        CHECK(ld_constraint_lhs(p, cfg) == doctest::Approx(2.0 * 0.1 * nested).epsilon(1e-13));
    }
}

TEST_CASE("feasibility examples") {
    CHECK(is_feasible(power({0.0, 0.0}), testing::distflow(2)));
    CHECK(is_feasible(power({0.0, 0.0}), testing::linearized(2)));

    const FeasibilityReport d = check_feasibility(power({0.3, 0.2}), testing::distflow(2));
    CHECK_FALSE(d.feasible);
    CHECK(d.constraint_value == doctest::Approx(1.0694118).epsilon(1e-7));
    CHECK(d.bound == doctest::Approx(1.0 / 0.95).epsilon(1e-15));

    const FeasibilityReport l = check_feasibility(power({0.3, 0.2}), testing::linearized(2));
    CHECK_FALSE(l.feasible);
    CHECK(l.constraint_value == doctest::Approx(0.14));
    CHECK(l.bound == doctest::Approx(0.1080332).epsilon(1e-7));
}

TEST_CASE("branch flow reconstruction") {
    SUBCASE("zero load") {
        const auto cfg = testing::distflow(3);
        const AllocationVector p = power({0.0, 0.0, 0.0});
        for (const BranchFlow& f : reconstruct_branch_flows(voltage_profile_distflow(p, cfg), p, cfg)) {
            CHECK(f.current == 0.0);
            CHECK(f.sending_power == 0.0);
        }
    }
    SUBCASE("single edge") {
        const auto cfg = testing::distflow(1);
        const AllocationVector p = power({1.0});
        const VoltageProfile v{{1.1, 1.0}};
        const auto flows = reconstruct_branch_flows(v, p, cfg);
        CHECK(flows[0].current == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(flows[0].sending_power == doctest::Approx(1.1).epsilon(1e-14));
        CHECK(std::abs(power_balance_residuals(flows, p, cfg)[0]) <= 1e-12);
    }
    SUBCASE("two edges") {
        const auto cfg = testing::distflow(2);
        const AllocationVector p = power({0.3, 0.2});
        const auto flows = reconstruct_branch_flows(voltage_profile_distflow(p, cfg), p, cfg);
        CHECK(flows[1].current == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(flows[0].current == doctest::Approx(0.4941176).epsilon(1e-7));
        for (double r : power_balance_residuals(flows, p, cfg)) CHECK(std::abs(r) <= 1e-12);
    }
    SUBCASE("length mismatch") {
        const auto cfg = testing::distflow(2);
        CHECK_THROWS_AS(reconstruct_branch_flows(VoltageProfile{{1.0, 1.0}}, power({0.1, 0.1}), cfg),
                        ValidationError);
    }
}

TEST_CASE("node balances hold on random loads") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> size(1, 8);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        const auto cfg = testing::distflow(n);
        const AllocationVector p = testing::uniform_power(rng, n, 0.5);
        const auto flows = reconstruct_branch_flows(voltage_profile_distflow(p, cfg), p, cfg);
        for (double r : power_balance_residuals(flows, p, cfg)) REQUIRE(std::abs(r) <= 1e-12);
    }
}

TEST_CASE("root voltage is nondecreasing in every injection") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> size(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        const auto cfg = testing::distflow(n);
        AllocationVector p = testing::uniform_power(rng, n, 0.5);
        const std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        const double before = root_voltage(p, cfg);
        p.power[j] += 1e-6;
        REQUIRE(root_voltage(p, cfg) >= before);
    }
}

TEST_CASE("distflow root voltage dominates the linearized bound") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> size(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = size(rng);
        auto cfg = testing::distflow(n);
        const AllocationVector p = testing::uniform_power(rng, n, 0.5);
        const double v0 = root_voltage(p, cfg);
        REQUIRE(v0 >= std::sqrt(1.0 + ld_constraint_lhs(p, cfg)) - 1e-15);
        // Squared-voltage form of the linearized limit: V_0^2 <= 1/(1-Delta)^2.
        const bool distflow_ok = is_feasible(p, cfg);
        cfg.model = PowerFlowModel::LinearizedDistflow;
        if (distflow_ok) REQUIRE(is_feasible(p, cfg));
    }
}

TEST_CASE("root voltage gradient agrees with central differences") {
    std::mt19937_64 rng(19);
    std::uniform_int_distribution<int> size(1, 6);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = size(rng);
        const auto cfg = testing::distflow(n);
        AllocationVector p = testing::uniform_power(rng, n, 0.5);
        for (double& v : p.power) v += 0.01;
        std::vector<double> g(n);
        root_voltage_gradient(p, cfg, g);
        for (int j = 0; j < n; ++j) {
            AllocationVector up = p, down = p;
            up.power[j] += 1e-6;
            down.power[j] -= 1e-6;
            const double fd = (root_voltage(up, cfg) - root_voltage(down, cfg)) / 2e-6;
            REQUIRE(std::abs(g[j] - fd) <= 1e-4 * std::abs(fd));
        }
    }
}

TEST_CASE("max feasible scale examples") {
    const double d = 0.05, r = 0.1;
    // On an axis V_0 = 1 + k r t; the largest feasible t includes the 1e-9 slack.
    const double slack = kFeasibilityTolerance;
    CHECK(std::abs(max_feasible_scale(power({1.0, 0.0}), testing::distflow(2)) - (d / (1 - d) + slack) / r) <=
          2 * kScaleTolerance);
    CHECK(std::abs(max_feasible_scale(power({0.0, 1.0}), testing::distflow(2)) - (d / (1 - d) + slack) / (2 * r)) <=
          2 * kScaleTolerance);
    CHECK(std::abs(max_feasible_scale(power({0.0, 4.0}), testing::distflow(2)) - (d / (1 - d) + slack) / (8 * r)) <=
          kScaleTolerance);
    CHECK(max_feasible_scale(power({1.0, 0.0}), testing::linearized(2)) ==
          doctest::Approx(ld_budget(d) / (2 * r)).epsilon(1e-14));
    CHECK(max_feasible_scale(power({1.0, 0.0}), testing::distflow(2)) == doctest::Approx(0.5263158).epsilon(1e-7));
    CHECK(max_feasible_scale(power({1.0, 0.0}), testing::linearized(2)) ==
          doctest::Approx(0.5401662).epsilon(1e-7));
    CHECK_THROWS_AS(max_feasible_scale(power({0.0, 0.0}), testing::distflow(2)), ValidationError);
}

TEST_CASE("max feasible scale sits on the boundary") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> size(1, 5);
    for (auto model : {PowerFlowModel::Distflow, PowerFlowModel::LinearizedDistflow}) {
        for (int trial = 0; trial < 300; ++trial) {
            const int n = size(rng);
            const auto cfg = testing::network(n, model);
            AllocationVector dir = testing::uniform_power(rng, n, 1.0);
            double l1 = 0.0;
            for (double v : dir.power) l1 += v;
            for (double& v : dir.power) v /= l1;
            const double t = max_feasible_scale(dir, cfg);
            AllocationVector at = dir, past = dir;
            for (double& v : at.power) v *= t;
            for (double& v : past.power) v *= t + 1e-8;
            REQUIRE(is_feasible(at, cfg));
            REQUIRE_FALSE(is_feasible(past, cfg));
        }
    }
}

TEST_CASE("boundary scale lands on the limit") {
    const double edge = 0.05 / 0.95;
    CHECK(boundary_scale(power({1.0, 0.0}), testing::distflow(2)) == doctest::Approx(edge / 0.1).epsilon(1e-14));
    CHECK(boundary_scale(power({0.0, 1.0}), testing::distflow(2)) == doctest::Approx(edge / 0.2).epsilon(1e-14));
    CHECK(boundary_scale(power({1.0, 0.0}), testing::linearized(2)) ==
          max_feasible_scale(power({1.0, 0.0}), testing::linearized(2)));
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + trial % 6;
        const auto cfg = testing::distflow(n);
        AllocationVector dir = testing::uniform_power(rng, n, 1.0);
        dir.power[0] += 1e-3;
        const double t = boundary_scale(dir, cfg);
        for (double& v : dir.power) v *= t;
        REQUIRE(std::abs(root_voltage(dir, cfg) - cfg.root_voltage_limit()) <= 4e-15);
        REQUIRE(is_feasible(dir, cfg));
    }
}

TEST_CASE("batched scales and voltages match the scalar routines") {
    std::mt19937_64 rng(29);
    for (int n : {1, 2, 3, 7}) {
        const auto cfg = testing::distflow(n);
        std::vector<AllocationVector> dirs;
        for (int i = 0; i < 37; ++i) {
            AllocationVector d = testing::uniform_power(rng, n, 1.0);
            d.power[0] += 1e-3;
            dirs.push_back(d);
        }
        const std::vector<double> scales = max_feasible_scales_distflow(dirs, cfg);
        const std::vector<double> roots = root_voltages(dirs, cfg);
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            CHECK(scales[i] == doctest::Approx(max_feasible_scale(dirs[i], cfg)).epsilon(1e-9));
            CHECK(roots[i] == root_voltage(dirs[i], cfg));
        }
    }
}

}
