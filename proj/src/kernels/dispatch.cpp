#include <cstdlib>
#include <string>

#include "gridshare/kernels.hpp"
#include "kernel_impl.hpp"

namespace gridshare::kernels {

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable* avx2_kernels() {
#if defined(GRIDSHARE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable& chosen = [&]() -> const KernelTable& {
        const char* forced = std::getenv("GRIDSHARE_KERNELS");
        if (forced != nullptr && std::string(forced) == "scalar") return scalar_kernels();
        if (const KernelTable* fast = avx2_kernels()) return *fast;
        return scalar_kernels();
    }();
    return chosen;
}

}  // namespace gridshare::kernels
