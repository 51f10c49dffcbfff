#include "gplm/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace gplm::kern {

namespace {

const Ops& select() {
    const char* pref = std::getenv("GPLM_KERNELS");
    if (pref && std::strcmp(pref, "scalar") == 0) return scalar_ops();
    if (pref && std::strcmp(pref, "avx2") == 0) {
        if (!avx2_available())
            throw std::runtime_error("GPLM_KERNELS=avx2 requested but CPU lacks AVX2/FMA");
        return avx2_ops();
    }
    return avx2_available() ? avx2_ops() : scalar_ops();
}

}  // namespace

const Ops& active() {
    static const Ops& ops = select();
    return ops;
}

}  // namespace gplm::kern
