#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace gridshare::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

/// Root voltage of the Distflow recursion for a batch of allocations laid out
/// station-major: powers[j * lanes + l] is p_{j+1} of lane l. A lane whose
/// recursion hits a non-positive voltage gets NaN.
using RootVoltageFn = void (*)(std::span<const double> powers, std::size_t stations,
                               std::size_t lanes, double resistance, std::span<double> root);

/// Generator of the occupancy chain on {0..K}^N, lot 1 varying fastest.
struct GeneratorView {
    std::size_t stations = 0;
    std::size_t capacity = 0;
    std::span<const double> arrival;    ///< lambda_j, size N
    std::span<const double> departure;  ///< departure[j * states + s] = rate out of lot j in state s
    std::span<const double> exit_rate;  ///< total outgoing rate per state
};

/// out = pi * Q.
using GeneratorApplyFn = void (*)(const GeneratorView& q, std::span<const double> pi,
                                  std::span<double> out);

using MaxAbsFn = double (*)(std::span<const double> values);

/// y += a * x, elementwise (no fused multiply-add, so every variant rounds alike).
using AxpyFn = void (*)(double a, std::span<const double> x, std::span<double> y);

struct KernelTable {
    Isa isa;
    RootVoltageFn root_voltage;
    GeneratorApplyFn generator_apply;
    MaxAbsFn max_abs;
    AxpyFn axpy;
};

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 variants were not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Best table for this CPU. GRIDSHARE_KERNELS=scalar forces the reference path.
const KernelTable& active_kernels();

}  // namespace gridshare::kernels
