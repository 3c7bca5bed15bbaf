#include <cmath>
#include <limits>

#include "gridshare/kernels.hpp"
#include "kernel_impl.hpp"

namespace gridshare::kernels {
namespace scalar {

void root_voltage(std::span<const double> powers, std::size_t stations, std::size_t lanes,
                  double resistance, std::span<double> root) {
    for (std::size_t l = 0; l < lanes; ++l) {
        double v_next = 1.0;
        double v_cur = 1.0 + resistance * powers[(stations - 1) * lanes + l];
        bool broken = false;
        for (std::size_t j = stations - 1; j >= 1; --j) {
            broken |= !(v_cur > 0.0);
            const double v_prev = (2.0 * v_cur - v_next) + (resistance * powers[(j - 1) * lanes + l]) / v_cur;
            v_next = v_cur;
            v_cur = v_prev;
        }
        broken |= !(v_cur > 0.0);
        root[l] = broken ? std::numeric_limits<double>::quiet_NaN() : v_cur;
    }
}

void generator_apply(const GeneratorView& q, std::span<const double> pi, std::span<double> out) {
    const std::size_t side = q.capacity + 1;
    const std::size_t states = pi.size();
    const std::size_t rows = states / side;
    const double* dep1 = q.departure.data();
    const double lambda1 = q.arrival[0];

    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t base = row * side;
        for (std::size_t i = 0; i < side; ++i) {
            const std::size_t s = base + i;
            double y = -(pi[s] * q.exit_rate[s]);
            if (i > 0) y += lambda1 * pi[s - 1];
            if (i < q.capacity) y += pi[s + 1] * dep1[s + 1];
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
            out[s] = y;
        }
    }
}

double max_abs(std::span<const double> values) {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = y[i] + a * x[i];
}

}  // namespace scalar

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::Scalar, &scalar::root_voltage, &scalar::generator_apply,
                                   &scalar::max_abs, &scalar::axpy};
    return table;
}

}  // namespace gridshare::kernels
