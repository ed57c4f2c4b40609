#include <atomic>

#include "banet/kern/kernels.hpp"

#include "lanes.hpp"

namespace banet::kern {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool cpu_has_avx512() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq");
#else
  return false;
#endif
}

const Kernels* pick_auto() {
#if defined(BANET_HAVE_AVX512)
  if (cpu_has_avx512()) return &kAvx512Kernels;
#endif
#if defined(BANET_HAVE_AVX2)
  if (cpu_has_avx2()) return &kAvx2Kernels;
#endif
  return &kScalarKernels;
}

std::atomic<const Kernels*> g_active{nullptr};

} // namespace

const Kernels& active() {
  const Kernels* k = g_active.load(std::memory_order_acquire);
  if (!k) {
    k = pick_auto();
    g_active.store(k, std::memory_order_release);
  }
  return *k;
}

bool select(std::string_view name) {
  if (name == "auto") {
    g_active.store(pick_auto(), std::memory_order_release);
    return true;
  }
  if (name == "scalar") {
    g_active.store(&kScalarKernels, std::memory_order_release);
    return true;
  }
#if defined(BANET_HAVE_AVX2)
  if (name == "avx2" && cpu_has_avx2()) {
    g_active.store(&kAvx2Kernels, std::memory_order_release);
    return true;
  }
#endif
#if defined(BANET_HAVE_AVX512)
  if (name == "avx512" && cpu_has_avx512()) {
    g_active.store(&kAvx512Kernels, std::memory_order_release);
    return true;
  }
#endif
  return false;
}

std::vector<std::string> available() {
  std::vector<std::string> out;
#if defined(BANET_HAVE_AVX512)
  if (cpu_has_avx512()) out.emplace_back("avx512");
#endif
#if defined(BANET_HAVE_AVX2)
  if (cpu_has_avx2()) out.emplace_back("avx2");
#endif
  out.emplace_back("scalar");
  return out;
}

} // namespace banet::kern
