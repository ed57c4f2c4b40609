#pragma once

#include "banet/kern/kernels.hpp"

namespace banet::kern {
extern const Kernels kScalarKernels;
#if defined(BANET_HAVE_AVX2) || defined(__AVX2__)
extern const Kernels kAvx2Kernels;
#endif
#if defined(BANET_HAVE_AVX512) || defined(__AVX512F__)
extern const Kernels kAvx512Kernels;
#endif
} // namespace banet::kern
