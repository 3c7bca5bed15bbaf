#include <immintrin.h>

#include <cmath>
#include <limits>
#include <vector>

#include "gridshare/kernels.hpp"
#include "kernel_impl.hpp"

// Every arithmetic step mirrors scalar.cpp operation for operation, so the two
// variants agree bit for bit.

namespace gridshare::kernels {
namespace {

void root_voltage(std::span<const double> powers, std::size_t stations, std::size_t lanes,
                  double resistance, std::span<double> root) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d r = _mm256_set1_pd(resistance);
    const __m256d nan = _mm256_set1_pd(std::numeric_limits<double>::quiet_NaN());

    std::size_t l = 0;
    for (; l + 4 <= lanes; l += 4) {
        __m256d v_next = one;
        __m256d v_cur = _mm256_add_pd(one, _mm256_mul_pd(r, _mm256_loadu_pd(&powers[(stations - 1) * lanes + l])));
        __m256d ok = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
        for (std::size_t j = stations - 1; j >= 1; --j) {
            ok = _mm256_and_pd(ok, _mm256_cmp_pd(v_cur, zero, _CMP_GT_OQ));
            const __m256d pj = _mm256_loadu_pd(&powers[(j - 1) * lanes + l]);
            const __m256d lin = _mm256_sub_pd(_mm256_mul_pd(two, v_cur), v_next);
            const __m256d v_prev = _mm256_add_pd(lin, _mm256_div_pd(_mm256_mul_pd(r, pj), v_cur));
            v_next = v_cur;
            v_cur = v_prev;
        }
        ok = _mm256_and_pd(ok, _mm256_cmp_pd(v_cur, zero, _CMP_GT_OQ));
        _mm256_storeu_pd(&root[l], _mm256_blendv_pd(nan, v_cur, ok));
    }
    if (l < lanes) {
        // Tail lanes: repack into a contiguous station-major block for the scalar path.
        const std::size_t tail = lanes - l;
        std::vector<double> packed(stations * tail);
        for (std::size_t j = 0; j < stations; ++j)
            for (std::size_t t = 0; t < tail; ++t) packed[j * tail + t] = powers[j * lanes + l + t];
        scalar::root_voltage(packed, stations, tail, resistance, root.subspan(l, tail));
    }
}

// out[s] for one interior element, same term order as the scalar loop.
inline double element(const GeneratorView& q, const double* pi, std::size_t s, std::size_t i,
                      std::size_t row, std::size_t states) {
    const std::size_t side = q.capacity + 1;
    double y = -(pi[s] * q.exit_rate[s]);
    if (i > 0) y += q.arrival[0] * pi[s - 1];
    if (i < q.capacity) y += pi[s + 1] * q.departure[s + 1];
    std::size_t stride = side;
    std::size_t rest = row;
    for (std::size_t j = 1; j < q.stations; ++j) {
        const std::size_t coord = rest % side;
        rest /= side;
        const double* depj = q.departure.data() + j * states;
        if (coord > 0) y += q.arrival[j] * pi[s - stride];
        if (coord < q.capacity) y += pi[s + stride] * depj[s + stride];
        stride *= side;
    }
    return y;
}

void generator_apply(const GeneratorView& q, std::span<const double> pi_span, std::span<double> out) {
    const std::size_t side = q.capacity + 1;
    const std::size_t states = pi_span.size();
    const std::size_t rows = states / side;
    const double* pi = pi_span.data();
    const double* exit = q.exit_rate.data();
    const double* dep1 = q.departure.data();
    const __m256d sign = _mm256_set1_pd(-0.0);
    const __m256d lambda1 = _mm256_set1_pd(q.arrival[0]);

    struct Neighbour {
        bool below, above;
        std::size_t stride;
        const double* dep;
        __m256d lambda;
    };
    Neighbour nb[16];
    const std::size_t higher = q.stations - 1;

    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t base = row * side;
        if (higher > 16 || side < 3) {
            for (std::size_t i = 0; i < side; ++i) out[base + i] = element(q, pi, base + i, i, row, states);
            continue;
        }
        std::size_t stride = side;
        std::size_t rest = row;
        for (std::size_t j = 1; j < q.stations; ++j) {
            const std::size_t coord = rest % side;
            rest /= side;
            nb[j - 1] = {coord > 0, coord < q.capacity, stride, q.departure.data() + j * states,
                         _mm256_set1_pd(q.arrival[j])};
            stride *= side;
        }

        out[base] = element(q, pi, base, 0, row, states);
        std::size_t i = 1;
        // Interior of the row: both lot-1 neighbours exist.
        for (; i + 4 <= q.capacity; i += 4) {
            const std::size_t s = base + i;
            __m256d y = _mm256_xor_pd(sign, _mm256_mul_pd(_mm256_loadu_pd(pi + s), _mm256_loadu_pd(exit + s)));
            y = _mm256_add_pd(y, _mm256_mul_pd(lambda1, _mm256_loadu_pd(pi + s - 1)));
            y = _mm256_add_pd(y, _mm256_mul_pd(_mm256_loadu_pd(pi + s + 1), _mm256_loadu_pd(dep1 + s + 1)));
            for (std::size_t k = 0; k < higher; ++k) {
                const Neighbour& n = nb[k];
                if (n.below) y = _mm256_add_pd(y, _mm256_mul_pd(n.lambda, _mm256_loadu_pd(pi + s - n.stride)));
                if (n.above)
                    y = _mm256_add_pd(y, _mm256_mul_pd(_mm256_loadu_pd(pi + s + n.stride),
                                                       _mm256_loadu_pd(n.dep + s + n.stride)));
            }
            _mm256_storeu_pd(out.data() + s, y);
        }
        for (; i < side; ++i) out[base + i] = element(q, pi, base + i, i, row, states);
    }
}

double max_abs(std::span<const double> values) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= values.size(); i += 4) m = _mm256_max_pd(m, _mm256_and_pd(mask, _mm256_loadu_pd(&values[i])));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    double best = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < values.size(); ++i) best = std::max(best, std::fabs(values[i]));
    return best;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    const __m256d va = _mm256_set1_pd(a);
    const std::size_t n = y.size();
    double* py = y.data();
    const double* px = x.data();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d y0 = _mm256_add_pd(_mm256_loadu_pd(py + i), _mm256_mul_pd(va, _mm256_loadu_pd(px + i)));
        const __m256d y1 = _mm256_add_pd(_mm256_loadu_pd(py + i + 4), _mm256_mul_pd(va, _mm256_loadu_pd(px + i + 4)));
        _mm256_storeu_pd(py + i, y0);
        _mm256_storeu_pd(py + i + 4, y1);
    }
    for (; i < n; ++i) py[i] = py[i] + a * px[i];
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{Isa::Avx2, &root_voltage, &generator_apply, &max_abs, &axpy};
    return table;
}

}  // namespace gridshare::kernels
