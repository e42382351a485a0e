#include "usln/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace usln::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* select() {
    const char* forced = std::getenv("USLN_KERNELS");
    if (forced != nullptr) {
        if (std::strcmp(forced, "scalar") == 0) return &scalar_table();
        if (std::strcmp(forced, "avx2") == 0 && avx2_table() != nullptr && cpu_has_avx2())
            return avx2_table();
        // Unknown or unavailable request falls back to auto selection.
    }
    if (avx2_table() != nullptr && cpu_has_avx2()) return avx2_table();
    return &scalar_table();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable* table = select();
    return *table;
}

}  // namespace usln::kernels
