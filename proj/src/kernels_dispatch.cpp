#include "mhmm/kernels.hpp"

#include <cstdlib>
#include <string>

namespace mhmm::kernels {

const Kernels* avx2_kernels_impl();  // defined in kernels_avx2.cpp

const Kernels* avx2_kernels() {
#if defined(__x86_64__) || defined(_M_X64)
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma"))
    return nullptr;
  return avx2_kernels_impl();
#else
  return nullptr;
#endif
}

const Kernels& active_kernels() {
  static const Kernels* selected = []() -> const Kernels* {
    const char* env = std::getenv("MHMM_KERNELS");
    const std::string pref = env ? env : "auto";
    if (pref == "scalar") return &scalar_kernels();
    const Kernels* avx2 = avx2_kernels();
    if (pref == "avx2" && !avx2) return &scalar_kernels();
    return avx2 ? avx2 : &scalar_kernels();
  }();
  return *selected;
}

}  // namespace mhmm::kernels
