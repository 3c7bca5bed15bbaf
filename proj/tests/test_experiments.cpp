#include <doctest.h>

#include <cmath>
#include <vector>

#include "gridshare/errors.hpp"
#include "gridshare/experiments.hpp"
#include "support.hpp"

using namespace gridshare;
using namespace gridshare::experiments;

namespace {

SweepTable synthetic(const std::vector<double>& rates, const std::vector<double>& totals,
                     PowerFlowModel model = PowerFlowModel::Distflow) {
    SweepTable t;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        SweepRow row;
        row.model = model;
        row.rate = rates[i];
        row.total_rate = 2 * rates[i];
        markov::SimulationResult r;
        r.exact = true;
        r.lots.resize(2);
        r.lots[0].mean_number = totals[i] / 2;
        r.lots[1].mean_number = totals[i] / 2;
        r.total_mean_number = totals[i];
        row.result = r;
        t.rows.push_back(row);
    }
    return t;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("max-jump rule examples") {
    const CriticalEstimate e =
        estimate_critical_rate(synthetic({0.10, 0.14, 0.18, 0.22, 0.26}, {1, 2, 3, 50, 60}), PowerFlowModel::Distflow);
    CHECK(e.rate == doctest::Approx(0.20));
    CHECK(e.max_jump == doctest::Approx(47));
    CHECK_FALSE(e.tied);
    CHECK_FALSE(e.no_explosion);

    const CriticalEstimate linear =
        estimate_critical_rate(synthetic({0.1, 0.2, 0.3, 0.4}, {1, 2, 3, 4}), PowerFlowModel::Distflow);
    CHECK(linear.no_explosion);
    CHECK(linear.tied);
    CHECK(linear.candidates.size() == 3);
    CHECK(linear.rate == doctest::Approx(0.35));

    const CriticalEstimate two =
        estimate_critical_rate(synthetic({0.1, 0.2, 0.3, 0.4}, {0, 10, 10, 20}), PowerFlowModel::Distflow);
    CHECK(two.tied);
    CHECK_FALSE(two.no_explosion);

    CHECK_THROWS_AS(estimate_critical_rate(synthetic({0.1, 0.2}, {1, 2}), PowerFlowModel::Distflow), ValidationError);
}

TEST_CASE("tied candidates are reported in order") {
    const CriticalEstimate two =
        estimate_critical_rate(synthetic({0.1, 0.2, 0.3, 0.4}, {0, 10, 10, 20}), PowerFlowModel::Distflow);
    REQUIRE(two.candidates.size() == 2);
    CHECK(two.candidates[0] == doctest::Approx(0.15));
    CHECK(two.candidates[1] == doctest::Approx(0.35));
}

TEST_CASE("relative difference curve") {
    const SweepTable a = synthetic({0.1, 0.2, 0.3}, {0, 4, 10});
    const auto same =
        relative_difference_curve(a, synthetic({0.1, 0.2, 0.3}, {0, 4, 10}, PowerFlowModel::LinearizedDistflow));
    CHECK_FALSE(same[0].percent.has_value());
    CHECK(*same[1].percent == 0.0);
    CHECK(*same[2].percent == 0.0);

    const SweepTable b = synthetic({0.1, 0.2, 0.3}, {0, 3, 9}, PowerFlowModel::LinearizedDistflow);
    const auto diff = relative_difference_curve(a, b);
    CHECK(*diff[1].percent == doctest::Approx(25.0));
    CHECK(*diff[2].percent == doctest::Approx(10.0));
    CHECK_THROWS_AS(relative_difference_curve(a, synthetic({0.1, 0.2}, {1, 2})), ValidationError);
}

TEST_CASE("arithmetic grid") {
    const auto g = arithmetic_grid(0.02, 0.40, 0.005);
    CHECK(g.size() == 77);
    CHECK(g.front() == 0.02);
    CHECK(g.back() == doctest::Approx(0.40));
    CHECK(g[10] == 0.07);
    CHECK_THROWS_AS(arithmetic_grid(0.1, 0.0, 0.01), ValidationError);
    CHECK_THROWS_AS(arithmetic_grid(0.1, 0.2, 0.0), ValidationError);
}

TEST_CASE("sweep at zero load") {
    const SweepTable t = run_sweep({0.0}, {0.5, 0.5}, RateAxis::PerLot, testing::distflow(2, 10), {}, Method::Exact);
    REQUIRE(t.rows.size() == 1);
    REQUIRE(t.rows[0].ok());
    for (const auto& lot : t.rows[0].result->lots) CHECK(lot.mean_number == 0.0);
}

TEST_CASE("sweep rejects bad grids and records failures") {
    CHECK_THROWS_AS(run_sweep({0.2, 0.1}, {0.5, 0.5}, RateAxis::PerLot, testing::distflow(2, 10), {}, Method::Exact),
                    ValidationError);
    markov::SimulationConfig sim;
    sim.horizon = 1e3;
    sim.burn_in = 1e2;
    // Exact method beyond the state limit fails per point; the sweep carries on.
    const SweepTable t =
        run_sweep({0.1, 0.2}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, RateAxis::PerLot, testing::distflow(3, 120), sim,
                  Method::Exact);
    REQUIRE(t.rows.size() == 2);
    for (const auto& row : t.rows) {
        CHECK_FALSE(row.ok());
        CHECK_FALSE(row.error.empty());
    }
}

TEST_CASE("method resolution") {
    CHECK(resolve_method(Method::Auto, testing::distflow(2, 100)) == Method::Exact);
    CHECK(resolve_method(Method::Auto, testing::distflow(3, 100)) == Method::Simulation);
    CHECK(resolve_method(Method::Simulation, testing::distflow(2, 100)) == Method::Simulation);
    CHECK(parse_method("sim") == Method::Simulation);
    CHECK_THROWS_AS(parse_method("monte-carlo"), ValidationError);
}

TEST_CASE("linearized means stay below distflow means") {
    const auto grid = arithmetic_grid(0.05, 0.25, 0.05);
    const SweepTable d = run_sweep(grid, {0.5, 0.5}, RateAxis::PerLot, testing::distflow(2, 30), {}, Method::Exact);
    const SweepTable l = run_sweep(grid, {0.5, 0.5}, RateAxis::PerLot, testing::linearized(2, 30), {}, Method::Exact);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(l.rows[i].result->lots[j].mean_number <= d.rows[i].result->lots[j].mean_number);
            CHECK(*l.rows[i].result->lots[j].mean_time <= *d.rows[i].result->lots[j].mean_time);
        }
    }
}

TEST_CASE("heat map zero row and determinism") {
    markov::SimulationConfig sim;
    sim.horizon = 2e3;
    sim.burn_in = 2e2;
    const auto cfg = testing::distflow(2, 8);
    const HeatmapTable exact = run_heatmap({0.0, 0.5}, {0.25, 0.5, 0.75}, cfg, sim, Method::Exact);
    REQUIRE(exact.rows.size() == 6);
    for (const auto& row : exact.rows)
        if (row.total_rate == 0.0) CHECK(*row.total_mean_number == 0.0);

    const HeatmapTable s1 = run_heatmap({0.5}, {0.25, 0.75}, cfg, sim, Method::Simulation, 1);
    const HeatmapTable s2 = run_heatmap({0.5}, {0.25, 0.75}, cfg, sim, Method::Simulation, 2);
    for (std::size_t i = 0; i < s1.rows.size(); ++i) {
        CHECK(*s1.rows[i].total_mean_number == *s2.rows[i].total_mean_number);
        CHECK(s1.rows[i].ci == s2.rows[i].ci);
    }
    CHECK_THROWS_AS(run_heatmap({0.5}, {1.5}, cfg, sim, Method::Exact), ValidationError);
    CHECK_THROWS_AS(run_heatmap({0.5}, {0.5}, testing::distflow(3, 4), sim, Method::Exact), ValidationError);
}

TEST_CASE("sweeps are reproducible across thread counts") {
    markov::SimulationConfig sim;
    sim.horizon = 5e3;
    sim.burn_in = 5e2;
    const auto grid = arithmetic_grid(0.05, 0.2, 0.05);
    const auto cfg = testing::distflow(2, 5);
    const SweepTable a = run_sweep(grid, {0.5, 0.5}, RateAxis::PerLot, cfg, sim, Method::Simulation, 1);
    const SweepTable b = run_sweep(grid, {0.5, 0.5}, RateAxis::PerLot, cfg, sim, Method::Simulation, 3);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(a.rows[i].result->lots[j].mean_number == b.rows[i].result->lots[j].mean_number);
}

TEST_CASE("total-rate axis splits by fractions") {
    const SweepTable t =
        run_sweep({0.4}, {0.25, 0.75}, RateAxis::Total, testing::distflow(2, 5), {}, Method::Exact);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].lambda[0] == doctest::Approx(0.1));
    CHECK(t.rows[0].lambda[1] == doctest::Approx(0.3));
    CHECK(t.rows[0].total_rate == doctest::Approx(0.4));
}

}
