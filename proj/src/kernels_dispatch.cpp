#include "mdn/kernels.hpp"

#include <cstdlib>

namespace mdn::kernels {

namespace detail {
const Kernels* avx2_impl();  // nullptr when the TU was built without AVX2
}

namespace {

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

const Kernels* resolve(const std::string& want) {
    if (want == "scalar") return &scalar();
    if (want == "avx2") return avx2();
    return nullptr;  // auto
}

const Kernels* g_active = nullptr;

}  // namespace

const Kernels* avx2() {
    static const Kernels* k = cpu_has_avx2() ? detail::avx2_impl() : nullptr;
    return k;
}

bool avx2_supported() { return avx2() != nullptr; }

const Kernels& active() {
    if (g_active == nullptr) {
        const char* env = std::getenv("MDN_KERNELS");
        const Kernels* k = env ? resolve(env) : nullptr;
        if (k == nullptr) k = avx2() ? avx2() : &scalar();
        g_active = k;
    }
    return *g_active;
}

void select_backend(const std::string& name) {
    const Kernels* k = resolve(name);
    g_active = k ? k : (avx2() ? avx2() : &scalar());
}

}  // namespace mdn::kernels
