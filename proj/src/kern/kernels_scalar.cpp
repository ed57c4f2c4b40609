#include <cmath>

#include "banet/kern/kernels.hpp"

#include "lanes.hpp"
#include "banet/kern/scalar_math.hpp"

// Reference lane. Loops are written so every output element sees the same
// operation sequence as the SIMD lanes: fused multiply-add in the GEMMs,
// plain mul/add elsewhere, shared transcendental cores.
namespace banet::kern {
namespace {

void gemm_nn_scalar(int m, int n, int k, const double* a, int lda,
                    const double* b, int ldb, double* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const double ap = a[static_cast<size_t>(i) * lda + p];
      const double* brow = b + static_cast<size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] = std::fma(ap, brow[j], crow[j]);
    }
  }
}

void gemm_tn_scalar(int m, int n, int k, const double* a, int lda,
                    const double* b, int ldb, double* c, int ldc) {
  for (int p = 0; p < k; ++p) {
    const double* arow = a + static_cast<size_t>(p) * lda;
    const double* brow = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const double ap = arow[i];
      double* crow = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) crow[j] = std::fma(ap, brow[j], crow[j]);
    }
  }
}

void exp_v_scalar(const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = detail::exp_core(x[i]);
}

void sigmoid_v_scalar(const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = detail::sigmoid_core(x[i]);
}

void tanh_v_scalar(const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = detail::tanh_core(x[i]);
}

void mul_v_scalar(const double* a, const double* b, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void madd_v_scalar(const double* a, const double* b, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = y[i] + a[i] * b[i];
}

void add_v_scalar(const double* a, const double* b, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void lstm_point_fwd_scalar(int n, double* gi, double* gf, double* go, double* gg,
                           const double* c_prev, double* c, double* tanh_c,
                           double* h) {
  for (int j = 0; j < n; ++j) {
    const double i_ = detail::sigmoid_core(gi[j]);
    const double f_ = detail::sigmoid_core(gf[j]);
    const double o_ = detail::sigmoid_core(go[j]);
    const double g_ = detail::tanh_core(gg[j]);
    gi[j] = i_;
    gf[j] = f_;
    go[j] = o_;
    gg[j] = g_;
    const double cc = f_ * c_prev[j] + i_ * g_;
    const double tc = detail::tanh_core(cc);
    c[j] = cc;
    tanh_c[j] = tc;
    h[j] = o_ * tc;
  }
}

void lstm_point_bwd_scalar(int n, const double* gi, const double* gf,
                           const double* go, const double* gg, const double* tanh_c,
                           const double* c_prev, const double* dh,
                           const double* dc_in, double* dgi, double* dgf,
                           double* dgo, double* dgg, double* dc_prev) {
  for (int j = 0; j < n; ++j) {
    const double i_ = gi[j];
    const double f_ = gf[j];
    const double o_ = go[j];
    const double g_ = gg[j];
    const double tc = tanh_c[j];
    const double dh_ = dh[j];
    const double dct = (dh_ * o_) * (1.0 - tc * tc) + dc_in[j];
    dgi[j] = (dct * g_) * (i_ * (1.0 - i_));
    dgf[j] = (dct * c_prev[j]) * (f_ * (1.0 - f_));
    dgo[j] = (dh_ * tc) * (o_ * (1.0 - o_));
    dgg[j] = (dct * i_) * (1.0 - g_ * g_);
    dc_prev[j] = dct * f_;
  }
}

} // namespace

const Kernels kScalarKernels = {
    "scalar",         gemm_nn_scalar, gemm_tn_scalar, exp_v_scalar,
    sigmoid_v_scalar, tanh_v_scalar,  mul_v_scalar,   madd_v_scalar,
    add_v_scalar,     lstm_point_fwd_scalar, lstm_point_bwd_scalar,
};

} // namespace banet::kern
