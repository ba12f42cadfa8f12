#include "msbt/kernels.hpp"

#include <cstdlib>

#include "msbt/error.hpp"

namespace msbt::kernels {
namespace {

bool avx2_supported() {
#if defined(MSBT_HAVE_AVX2)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Kernels* lookup(const std::string& name) {
    if (name == "scalar") return &kScalar;
#if defined(MSBT_HAVE_AVX2)
    if (name == "avx2") {
        if (!avx2_supported()) {
            throw ConfigError("kernels: avx2 requested but not supported by this CPU");
        }
        return &kAvx2;
    }
#endif
    throw ConfigError("kernels: unknown backend '" + name + "'");
}

const Kernels* detect() {
    if (const char* env = std::getenv("MSBT_KERNELS")) {
        return lookup(env);
    }
#if defined(MSBT_HAVE_AVX2)
    if (avx2_supported()) return &kAvx2;
#endif
    return &kScalar;
}

const Kernels*& selection() {
    static const Kernels* sel = detect();
    return sel;
}

}  // namespace

const Kernels& active() { return *selection(); }

void force(const std::string& name) { selection() = lookup(name); }

std::vector<std::string> available() {
    std::vector<std::string> out = {"scalar"};
#if defined(MSBT_HAVE_AVX2)
    if (avx2_supported()) out.push_back("avx2");
#endif
    return out;
}

}  // namespace msbt::kernels
