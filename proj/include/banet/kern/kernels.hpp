#pragma once

#include <string>
#include <string_view>
#include <vector>

// Arithmetic kernels behind the numerical core. Each operation exists as a
// scalar reference implementation plus SIMD variants (AVX2, AVX-512) selected
// once at startup from CPUID, or forced via select(). All lanes produce
// bit-identical results: FMA is correctly rounded on every lane (the scalar
// reference uses std::fma), per-element accumulation order is fixed, and the
// transcendental cores share one algorithm (see scalar_math.hpp).
namespace banet::kern {

struct Kernels {
  const char* name;

  // C[m x n] += A[m x k] * B[k x n], row-major with leading dimensions.
  void (*gemm_nn)(int m, int n, int k, const double* a, int lda,
                  const double* b, int ldb, double* c, int ldc);
  // C[m x n] += A^T * B where A is stored [k x m], B is [k x n].
  void (*gemm_tn)(int m, int n, int k, const double* a, int lda,
                  const double* b, int ldb, double* c, int ldc);

  void (*exp_v)(const double* x, double* y, int n);
  void (*sigmoid_v)(const double* x, double* y, int n);
  void (*tanh_v)(const double* x, double* y, int n);
  void (*mul_v)(const double* a, const double* b, double* y, int n);  // y = a.*b
  void (*madd_v)(const double* a, const double* b, double* y, int n); // y += a.*b
  void (*add_v)(const double* a, const double* b, double* y, int n);  // y = a+b

  // Fused LSTM pointwise cell update over n cells. Gate pre-activations come
  // as four contiguous planes; activations are applied in place, then
  // c = f.*c_prev + i.*g, tanh_c = tanh(c), h = o.*tanh_c.
  void (*lstm_point_fwd)(int n, double* gi, double* gf, double* go, double* gg,
                         const double* c_prev, double* c, double* tanh_c, double* h);
  // Reverse of the above. g* hold the activated forward values; outputs the
  // pre-activation gradient planes dg* and dc_prev.
  void (*lstm_point_bwd)(int n, const double* gi, const double* gf,
                         const double* go, const double* gg, const double* tanh_c,
                         const double* c_prev, const double* dh, const double* dc_in,
                         double* dgi, double* dgf, double* dgo, double* dgg,
                         double* dc_prev);
};

// Active kernel set (auto-selected on first use).
const Kernels& active();

// Force a lane: "auto", "scalar", "avx2", "avx512". Returns false if the
// requested lane is not available on this CPU/build.
bool select(std::string_view name);

// Lanes usable on this machine, best first.
std::vector<std::string> available();

} // namespace banet::kern
