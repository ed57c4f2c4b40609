#include "banet/kern/kernels.hpp"

#include "lanes.hpp"
#include "banet/kern/scalar_math.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

// AVX2 + FMA lane. Per-element operation order matches the scalar reference
// exactly; scalar tails call the shared cores.
namespace banet::kern {
namespace {

namespace d = detail;

inline __m256d exp4(__m256d x) {
  const __m256d lo = _mm256_set1_pd(d::kExpLo);
  const __m256d hi = _mm256_set1_pd(d::kExpHi);
  x = _mm256_blendv_pd(x, lo, _mm256_cmp_pd(x, lo, _CMP_LT_OQ));
  x = _mm256_blendv_pd(x, hi, _mm256_cmp_pd(x, hi, _CMP_GT_OQ));
  const __m256d magic = _mm256_set1_pd(d::kShiftMagic);
  const __m256d t = _mm256_add_pd(_mm256_mul_pd(x, _mm256_set1_pd(d::kLog2E)), magic);
  const __m256i n = _mm256_sub_epi64(_mm256_castpd_si256(t), _mm256_castpd_si256(magic));
  const __m256d kd = _mm256_sub_pd(t, magic);
  __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(kd, _mm256_set1_pd(d::kLn2Hi)));
  r = _mm256_sub_pd(r, _mm256_mul_pd(kd, _mm256_set1_pd(d::kLn2Lo)));
  __m256d p = _mm256_set1_pd(d::kExpPoly[11]);
  for (int i = 10; i >= 0; --i)
    p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(d::kExpPoly[i]));
  const __m256d rr = _mm256_mul_pd(r, r);
  p = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(p, rr), r), _mm256_set1_pd(1.0));
  const __m256i scale_bits =
      _mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(scale_bits));
}

inline __m256d sigmoid4(__m256d x) {
  const __m256d neg = _mm256_xor_pd(x, _mm256_set1_pd(-0.0));
  const __m256d e = exp4(neg);
  return _mm256_div_pd(_mm256_set1_pd(1.0), _mm256_add_pd(_mm256_set1_pd(1.0), e));
}

inline __m256d tanh4(__m256d x) {
  const __m256d signmask = _mm256_set1_pd(-0.0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ax = _mm256_andnot_pd(signmask, x);
  // small |x|: odd polynomial
  const __m256d t = _mm256_mul_pd(x, x);
  __m256d q = _mm256_set1_pd(d::kTanhPoly[5]);
  for (int i = 4; i >= 0; --i)
    q = _mm256_add_pd(_mm256_mul_pd(q, t), _mm256_set1_pd(d::kTanhPoly[i]));
  const __m256d small =
      _mm256_add_pd(x, _mm256_mul_pd(x, _mm256_mul_pd(t, q)));
  // large |x|: 1 - 2/(exp(2|x|)+1), sign restored
  const __m256d e = exp4(_mm256_mul_pd(_mm256_set1_pd(2.0), ax));
  __m256d y = _mm256_sub_pd(one, _mm256_div_pd(_mm256_set1_pd(2.0), _mm256_add_pd(e, one)));
  y = _mm256_or_pd(y, _mm256_and_pd(x, signmask));
  const __m256d small_mask = _mm256_cmp_pd(ax, _mm256_set1_pd(0.125), _CMP_LT_OQ);
  return _mm256_blendv_pd(y, small, small_mask);
}

// C[i,j] += sum_p A(i,p) * B[p,j]; TransA reads A(i,p) = a[p*lda + i].
template <bool TransA>
inline void gemm_avx2(int m, int n, int k, const double* a, int lda,
                      const double* b, int ldb, double* c, int ldc) {
  auto aval = [&](int i, int p) {
    return TransA ? a[static_cast<size_t>(p) * lda + i]
                  : a[static_cast<size_t>(i) * lda + p];
  };
  int i = 0;
  for (; i + 2 <= m; i += 2) {
    double* c0 = c + static_cast<size_t>(i) * ldc;
    double* c1 = c0 + ldc;
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d acc00 = _mm256_loadu_pd(c0 + j);
      __m256d acc01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d acc02 = _mm256_loadu_pd(c0 + j + 8);
      __m256d acc03 = _mm256_loadu_pd(c0 + j + 12);
      __m256d acc10 = _mm256_loadu_pd(c1 + j);
      __m256d acc11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d acc12 = _mm256_loadu_pd(c1 + j + 8);
      __m256d acc13 = _mm256_loadu_pd(c1 + j + 12);
      for (int p = 0; p < k; ++p) {
        const double* brow = b + static_cast<size_t>(p) * ldb + j;
        const __m256d a0 = _mm256_set1_pd(aval(i, p));
        const __m256d a1 = _mm256_set1_pd(aval(i + 1, p));
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        const __m256d b2 = _mm256_loadu_pd(brow + 8);
        const __m256d b3 = _mm256_loadu_pd(brow + 12);
        acc00 = _mm256_fmadd_pd(a0, b0, acc00);
        acc01 = _mm256_fmadd_pd(a0, b1, acc01);
        acc02 = _mm256_fmadd_pd(a0, b2, acc02);
        acc03 = _mm256_fmadd_pd(a0, b3, acc03);
        acc10 = _mm256_fmadd_pd(a1, b0, acc10);
        acc11 = _mm256_fmadd_pd(a1, b1, acc11);
        acc12 = _mm256_fmadd_pd(a1, b2, acc12);
        acc13 = _mm256_fmadd_pd(a1, b3, acc13);
      }
      _mm256_storeu_pd(c0 + j, acc00);
      _mm256_storeu_pd(c0 + j + 4, acc01);
      _mm256_storeu_pd(c0 + j + 8, acc02);
      _mm256_storeu_pd(c0 + j + 12, acc03);
      _mm256_storeu_pd(c1 + j, acc10);
      _mm256_storeu_pd(c1 + j + 4, acc11);
      _mm256_storeu_pd(c1 + j + 8, acc12);
      _mm256_storeu_pd(c1 + j + 12, acc13);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d acc0 = _mm256_loadu_pd(c0 + j);
      __m256d acc1 = _mm256_loadu_pd(c1 + j);
      for (int p = 0; p < k; ++p) {
        const __m256d bv = _mm256_loadu_pd(b + static_cast<size_t>(p) * ldb + j);
        acc0 = _mm256_fmadd_pd(_mm256_set1_pd(aval(i, p)), bv, acc0);
        acc1 = _mm256_fmadd_pd(_mm256_set1_pd(aval(i + 1, p)), bv, acc1);
      }
      _mm256_storeu_pd(c0 + j, acc0);
      _mm256_storeu_pd(c1 + j, acc1);
    }
    for (; j < n; ++j) {
      double s0 = c0[j], s1 = c1[j];
      for (int p = 0; p < k; ++p) {
        const double bv = b[static_cast<size_t>(p) * ldb + j];
        s0 = std::fma(aval(i, p), bv, s0);
        s1 = std::fma(aval(i + 1, p), bv, s1);
      }
      c0[j] = s0;
      c1[j] = s1;
    }
  }
  for (; i < m; ++i) {
    double* c0 = c + static_cast<size_t>(i) * ldc;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
      __m256d acc = _mm256_loadu_pd(c0 + j);
      for (int p = 0; p < k; ++p)
        acc = _mm256_fmadd_pd(_mm256_set1_pd(aval(i, p)),
                              _mm256_loadu_pd(b + static_cast<size_t>(p) * ldb + j), acc);
      _mm256_storeu_pd(c0 + j, acc);
    }
    for (; j < n; ++j) {
      double s = c0[j];
      for (int p = 0; p < k; ++p)
        s = std::fma(aval(i, p), b[static_cast<size_t>(p) * ldb + j], s);
      c0[j] = s;
    }
  }
}

void gemm_nn_avx2(int m, int n, int k, const double* a, int lda, const double* b,
                  int ldb, double* c, int ldc) {
  gemm_avx2<false>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn_avx2(int m, int n, int k, const double* a, int lda, const double* b,
                  int ldb, double* c, int ldc) {
  gemm_avx2<true>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <__m256d (*F4)(__m256d), double (*F1)(double)>
void map_v(const double* x, double* y, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, F4(_mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = F1(x[i]);
}

void exp_v_avx2(const double* x, double* y, int n) { map_v<exp4, d::exp_core>(x, y, n); }
void sigmoid_v_avx2(const double* x, double* y, int n) { map_v<sigmoid4, d::sigmoid_core>(x, y, n); }
void tanh_v_avx2(const double* x, double* y, int n) { map_v<tanh4, d::tanh_core>(x, y, n); }

void mul_v_avx2(const double* a, const double* b, double* y, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void madd_v_avx2(const double* a, const double* b, double* y, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a[i] * b[i];
}

void add_v_avx2(const double* a, const double* b, double* y, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void lstm_point_fwd_avx2(int n, double* gi, double* gf, double* go, double* gg,
                         const double* c_prev, double* c, double* tanh_c, double* h) {
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    const auto i_ = sigmoid4(_mm256_loadu_pd(gi + j));
    const auto f_ = sigmoid4(_mm256_loadu_pd(gf + j));
    const auto o_ = sigmoid4(_mm256_loadu_pd(go + j));
    const auto g_ = tanh4(_mm256_loadu_pd(gg + j));
    _mm256_storeu_pd(gi + j, i_);
    _mm256_storeu_pd(gf + j, f_);
    _mm256_storeu_pd(go + j, o_);
    _mm256_storeu_pd(gg + j, g_);
    const auto cp = _mm256_loadu_pd(c_prev + j);
    const auto cc = _mm256_add_pd(_mm256_mul_pd(f_, cp), _mm256_mul_pd(i_, g_));
    const auto tc = tanh4(cc);
    _mm256_storeu_pd(c + j, cc);
    _mm256_storeu_pd(tanh_c + j, tc);
    _mm256_storeu_pd(h + j, _mm256_mul_pd(o_, tc));
  }
  for (; j < n; ++j) {
    const double i_ = d::sigmoid_core(gi[j]);
    const double f_ = d::sigmoid_core(gf[j]);
    const double o_ = d::sigmoid_core(go[j]);
    const double g_ = d::tanh_core(gg[j]);
    gi[j] = i_;
    gf[j] = f_;
    go[j] = o_;
    gg[j] = g_;
    const double cc = f_ * c_prev[j] + i_ * g_;
    const double tc = d::tanh_core(cc);
    c[j] = cc;
    tanh_c[j] = tc;
    h[j] = o_ * tc;
  }
}

void lstm_point_bwd_avx2(int n, const double* gi, const double* gf, const double* go,
                         const double* gg, const double* tanh_c, const double* c_prev,
                         const double* dh, const double* dc_in, double* dgi,
                         double* dgf, double* dgo, double* dgg, double* dc_prev) {
  const __m256d one = _mm256_set1_pd(1.0);
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    const auto i_ = _mm256_loadu_pd(gi + j);
    const auto f_ = _mm256_loadu_pd(gf + j);
    const auto o_ = _mm256_loadu_pd(go + j);
    const auto g_ = _mm256_loadu_pd(gg + j);
    const auto tc = _mm256_loadu_pd(tanh_c + j);
    const auto dh_ = _mm256_loadu_pd(dh + j);
    const auto cp = _mm256_loadu_pd(c_prev + j);
    const auto w1 = _mm256_mul_pd(dh_, o_);
    const auto w3 = _mm256_sub_pd(one, _mm256_mul_pd(tc, tc));
    const auto dct = _mm256_add_pd(_mm256_mul_pd(w1, w3), _mm256_loadu_pd(dc_in + j));
    _mm256_storeu_pd(dgi + j, _mm256_mul_pd(_mm256_mul_pd(dct, g_), _mm256_mul_pd(i_, _mm256_sub_pd(one, i_))));
    _mm256_storeu_pd(dgf + j, _mm256_mul_pd(_mm256_mul_pd(dct, cp), _mm256_mul_pd(f_, _mm256_sub_pd(one, f_))));
    _mm256_storeu_pd(dgo + j, _mm256_mul_pd(_mm256_mul_pd(dh_, tc), _mm256_mul_pd(o_, _mm256_sub_pd(one, o_))));
    _mm256_storeu_pd(dgg + j, _mm256_mul_pd(_mm256_mul_pd(dct, i_), _mm256_sub_pd(one, _mm256_mul_pd(g_, g_))));
    _mm256_storeu_pd(dc_prev + j, _mm256_mul_pd(dct, f_));
  }
  for (; j < n; ++j) {
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

const Kernels kAvx2Kernels = {
    "avx2",         gemm_nn_avx2, gemm_tn_avx2, exp_v_avx2,
    sigmoid_v_avx2, tanh_v_avx2,  mul_v_avx2,   madd_v_avx2,
    add_v_avx2,     lstm_point_fwd_avx2, lstm_point_bwd_avx2,
};

} // namespace banet::kern

#endif // __AVX2__ && __FMA__
