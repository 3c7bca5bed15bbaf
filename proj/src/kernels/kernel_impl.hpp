#pragma once

#include "gridshare/kernels.hpp"

namespace gridshare::kernels {

namespace scalar {
void root_voltage(std::span<const double> powers, std::size_t stations, std::size_t lanes,
                  double resistance, std::span<double> root);
void generator_apply(const GeneratorView& q, std::span<const double> pi, std::span<double> out);
double max_abs(std::span<const double> values);
void axpy(double a, std::span<const double> x, std::span<double> y);
}  // namespace scalar

#ifdef GRIDSHARE_HAVE_AVX2
const KernelTable& avx2_table();
#endif

}  // namespace gridshare::kernels
