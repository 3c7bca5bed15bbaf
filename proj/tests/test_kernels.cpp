#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "gridshare/kernels.hpp"

using namespace gridshare::kernels;

namespace {

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct RandomGenerator {
    std::size_t stations, capacity, states;
    std::vector<double> arrival, departure, exit;
};

RandomGenerator random_generator(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomGenerator g{n, k, 1, {}, {}, {}};
    for (std::size_t j = 0; j < n; ++j) g.states *= k + 1;
    for (std::size_t j = 0; j < n; ++j) g.arrival.push_back(u(rng));
    g.departure.assign(n * g.states, 0.0);
    g.exit.assign(g.states, 0.0);
    for (std::size_t s = 0; s < g.states; ++s) {
        std::size_t rest = s;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t c = rest % (k + 1);
            rest /= k + 1;
            if (c > 0) g.departure[j * g.states + s] = u(rng);
            if (c < k) g.exit[s] += g.arrival[j];
            g.exit[s] += g.departure[j * g.states + s];
        }
    }
    return g;
}

GeneratorView view(const RandomGenerator& g) { return {g.stations, g.capacity, g.arrival, g.departure, g.exit}; }

// Dense pi * Q straight from the transition rules.
std::vector<double> dense_apply(const RandomGenerator& g, const std::vector<double>& pi) {
    std::vector<double> out(g.states, 0.0);
    for (std::size_t s = 0; s < g.states; ++s) {
        out[s] -= pi[s] * g.exit[s];
        std::size_t rest = s, stride = 1;
        for (std::size_t j = 0; j < g.stations; ++j) {
            const std::size_t c = rest % (g.capacity + 1);
            rest /= g.capacity + 1;
            if (c < g.capacity) out[s + stride] += pi[s] * g.arrival[j];
            if (c > 0) out[s - stride] += pi[s] * g.departure[j * g.states + s];
            stride *= g.capacity + 1;
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar generator matches a dense reference") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto [n, k] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 9}, {2, 3}, {2, 17}, {3, 4}}) {
        const RandomGenerator g = random_generator(rng, n, k);
        std::vector<double> pi(g.states), out(g.states);
        for (double& v : pi) v = u(rng);
        scalar_kernels().generator_apply(view(g), pi, out);
        const std::vector<double> ref = dense_apply(g, pi);
        for (std::size_t s = 0; s < g.states; ++s) CHECK(out[s] == doctest::Approx(ref[s]).epsilon(1e-13));
    }
}

TEST_CASE("scalar root voltage matches the recursion") {
    const double r = 0.1;
    const std::vector<double> powers = {0.3, 0.2};  // one lane, two stations
    std::vector<double> root(1);
    scalar_kernels().root_voltage(powers, 2, 1, r, root);
    CHECK(root[0] == doctest::Approx(2.0 * 1.02 - 1.0 + 0.03 / 1.02).epsilon(1e-15));
}

TEST_CASE("axpy and max_abs reference behaviour") {
    std::vector<double> y = {1.0, 2.0, 3.0};
    const std::vector<double> x = {1.0, -1.0, 0.5};
    scalar_kernels().axpy(2.0, x, y);
    CHECK(y == std::vector<double>{3.0, 0.0, 4.0});
    CHECK(scalar_kernels().max_abs(std::vector<double>{-5.0, 2.0, 4.5}) == 5.0);
    CHECK(scalar_kernels().max_abs(std::vector<double>{}) == 0.0);
}

TEST_CASE("avx2 variants are bit-identical to the scalar reference") {
    const KernelTable* fast = avx2_kernels();
    if (fast == nullptr) {
        MESSAGE("AVX2 kernels unavailable on this machine; equivalence not exercised");
        return;
    }
    const KernelTable& ref = scalar_kernels();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    SUBCASE("root voltage") {
        for (std::size_t stations : {1u, 2u, 3u, 8u}) {
            for (std::size_t lanes : {1u, 3u, 4u, 5u, 8u, 13u, 64u}) {
                std::vector<double> powers(stations * lanes);
                for (double& v : powers) v = u(rng);
                // A strongly negative injection drives one lane through zero voltage.
                if (lanes > 2 && stations > 1) powers[(stations - 1) * lanes + 1] = -50.0;
                std::vector<double> a(lanes), b(lanes);
                ref.root_voltage(powers, stations, lanes, 0.1, a);
                fast->root_voltage(powers, stations, lanes, 0.1, b);
                for (std::size_t l = 0; l < lanes; ++l) {
                    if (std::isnan(a[l]))
                        CHECK(std::isnan(b[l]));
                    else
                        CHECK(std::memcmp(&a[l], &b[l], sizeof(double)) == 0);
                }
            }
        }
    }
    SUBCASE("generator apply") {
        for (auto [n, k] : {std::pair<std::size_t, std::size_t>{1, 1}, {1, 2}, {1, 40}, {2, 1}, {2, 6},
                            {2, 100}, {3, 3}, {3, 11}, {4, 2}}) {
            const RandomGenerator g = random_generator(rng, n, k);
            std::vector<double> pi(g.states), a(g.states), b(g.states);
            for (double& v : pi) v = u(rng);
            ref.generator_apply(view(g), pi, a);
            fast->generator_apply(view(g), pi, b);
            CHECK(same_bits(a, b));
        }
    }
    SUBCASE("max_abs and axpy") {
        for (std::size_t len : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 1000u}) {
            std::vector<double> x(len), y(len);
            for (double& v : x) v = u(rng) - 0.5;
            for (double& v : y) v = u(rng) - 0.5;
            CHECK(ref.max_abs(x) == fast->max_abs(x));
            std::vector<double> y1 = y, y2 = y;
            ref.axpy(0.37, x, y1);
            fast->axpy(0.37, x, y2);
            CHECK(same_bits(y1, y2));
        }
    }
}

TEST_CASE("active table is one of the compiled variants") {
    const KernelTable& k = active_kernels();
    CHECK((k.isa == Isa::Scalar || k.isa == Isa::Avx2));
    CHECK(to_string(scalar_kernels().isa) == "scalar");
}

}
