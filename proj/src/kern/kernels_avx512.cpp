#include "banet/kern/kernels.hpp"

#include "lanes.hpp"
#include "banet/kern/scalar_math.hpp"

#if defined(__AVX512F__) && defined(__AVX512DQ__)

#include <immintrin.h>

#include <cmath>
#include <cstdint>

// AVX-512 lane, 8-wide mirror of the scalar reference.
namespace banet::kern {
namespace {

namespace d = detail;

inline __m512d exp8(__m512d x) {
  const __m512d lo = _mm512_set1_pd(d::kExpLo);
  const __m512d hi = _mm512_set1_pd(d::kExpHi);
  x = _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, lo, _CMP_LT_OQ), x, lo);
  x = _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, hi, _CMP_GT_OQ), x, hi);
  const __m512d magic = _mm512_set1_pd(d::kShiftMagic);
  const __m512d t = _mm512_add_pd(_mm512_mul_pd(x, _mm512_set1_pd(d::kLog2E)), magic);
  const __m512i n = _mm512_sub_epi64(_mm512_castpd_si512(t), _mm512_castpd_si512(magic));
  const __m512d kd = _mm512_sub_pd(t, magic);
  __m512d r = _mm512_sub_pd(x, _mm512_mul_pd(kd, _mm512_set1_pd(d::kLn2Hi)));
  r = _mm512_sub_pd(r, _mm512_mul_pd(kd, _mm512_set1_pd(d::kLn2Lo)));
  __m512d p = _mm512_set1_pd(d::kExpPoly[11]);
  for (int i = 10; i >= 0; --i)
    p = _mm512_add_pd(_mm512_mul_pd(p, r), _mm512_set1_pd(d::kExpPoly[i]));
  const __m512d rr = _mm512_mul_pd(r, r);
  p = _mm512_add_pd(_mm512_add_pd(_mm512_mul_pd(p, rr), r), _mm512_set1_pd(1.0));
  const __m512i scale_bits =
      _mm512_slli_epi64(_mm512_add_epi64(n, _mm512_set1_epi64(1023)), 52);
  return _mm512_mul_pd(p, _mm512_castsi512_pd(scale_bits));
}

inline __m512d sigmoid8(__m512d x) {
  const __m512d neg = _mm512_xor_pd(x, _mm512_set1_pd(-0.0));
  const __m512d e = exp8(neg);
  return _mm512_div_pd(_mm512_set1_pd(1.0), _mm512_add_pd(_mm512_set1_pd(1.0), e));
}

inline __m512d tanh8(__m512d x) {
  const __m512d signmask = _mm512_set1_pd(-0.0);
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d ax = _mm512_andnot_pd(signmask, x);
  const __m512d t = _mm512_mul_pd(x, x);
  __m512d q = _mm512_set1_pd(d::kTanhPoly[5]);
  for (int i = 4; i >= 0; --i)
    q = _mm512_add_pd(_mm512_mul_pd(q, t), _mm512_set1_pd(d::kTanhPoly[i]));
  const __m512d small = _mm512_add_pd(x, _mm512_mul_pd(x, _mm512_mul_pd(t, q)));
  const __m512d e = exp8(_mm512_mul_pd(_mm512_set1_pd(2.0), ax));
  __m512d y = _mm512_sub_pd(one, _mm512_div_pd(_mm512_set1_pd(2.0), _mm512_add_pd(e, one)));
  y = _mm512_or_pd(y, _mm512_and_pd(x, signmask));
  const __mmask8 small_mask = _mm512_cmp_pd_mask(ax, _mm512_set1_pd(0.125), _CMP_LT_OQ);
  return _mm512_mask_blend_pd(small_mask, y, small);
}

template <bool TransA>
inline void gemm_avx512(int m, int n, int k, const double* a, int lda,
                        const double* b, int ldb, double* c, int ldc) {
  auto aval = [&](int i, int p) {
    return TransA ? a[static_cast<size_t>(p) * lda + i]
                  : a[static_cast<size_t>(i) * lda + p];
  };
  int i = 0;
  for (; i + 4 <= m; i += 4) {
    double* crow[4] = {c + static_cast<size_t>(i) * ldc,
                       c + static_cast<size_t>(i + 1) * ldc,
                       c + static_cast<size_t>(i + 2) * ldc,
                       c + static_cast<size_t>(i + 3) * ldc};
    int j = 0;
    for (; j + 16 <= n; j += 16) {
      __m512d acc[4][2];
      for (int r = 0; r < 4; ++r) {
        acc[r][0] = _mm512_loadu_pd(crow[r] + j);
        acc[r][1] = _mm512_loadu_pd(crow[r] + j + 8);
      }
      for (int p = 0; p < k; ++p) {
        const double* brow = b + static_cast<size_t>(p) * ldb + j;
        const __m512d b0 = _mm512_loadu_pd(brow);
        const __m512d b1 = _mm512_loadu_pd(brow + 8);
        for (int r = 0; r < 4; ++r) {
          const __m512d av = _mm512_set1_pd(aval(i + r, p));
          acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
          acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
        }
      }
      for (int r = 0; r < 4; ++r) {
        _mm512_storeu_pd(crow[r] + j, acc[r][0]);
        _mm512_storeu_pd(crow[r] + j + 8, acc[r][1]);
      }
    }
    for (; j < n; j += 8) {
      const int rem = n - j;
      const __mmask8 mask = rem >= 8 ? static_cast<__mmask8>(0xFF)
                                     : static_cast<__mmask8>((1u << rem) - 1u);
      __m512d acc[4];
      for (int r = 0; r < 4; ++r) acc[r] = _mm512_maskz_loadu_pd(mask, crow[r] + j);
      for (int p = 0; p < k; ++p) {
        const __m512d bv = _mm512_maskz_loadu_pd(mask, b + static_cast<size_t>(p) * ldb + j);
        for (int r = 0; r < 4; ++r)
          acc[r] = _mm512_fmadd_pd(_mm512_set1_pd(aval(i + r, p)), bv, acc[r]);
      }
      for (int r = 0; r < 4; ++r) _mm512_mask_storeu_pd(crow[r] + j, mask, acc[r]);
    }
  }
  for (; i < m; ++i) {
    double* c0 = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; j += 8) {
      const int rem = n - j;
      const __mmask8 mask = rem >= 8 ? static_cast<__mmask8>(0xFF)
                                     : static_cast<__mmask8>((1u << rem) - 1u);
      __m512d acc = _mm512_maskz_loadu_pd(mask, c0 + j);
      for (int p = 0; p < k; ++p)
        acc = _mm512_fmadd_pd(_mm512_set1_pd(aval(i, p)),
                              _mm512_maskz_loadu_pd(mask, b + static_cast<size_t>(p) * ldb + j),
                              acc);
      _mm512_mask_storeu_pd(c0 + j, mask, acc);
    }
  }
}

void gemm_nn_avx512(int m, int n, int k, const double* a, int lda, const double* b,
                    int ldb, double* c, int ldc) {
  gemm_avx512<false>(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_tn_avx512(int m, int n, int k, const double* a, int lda, const double* b,
                    int ldb, double* c, int ldc) {
  gemm_avx512<true>(m, n, k, a, lda, b, ldb, c, ldc);
}

template <__m512d (*F8)(__m512d), double (*F1)(double)>
void map_v(const double* x, double* y, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8) _mm512_storeu_pd(y + i, F8(_mm512_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = F1(x[i]);
}

void exp_v_avx512(const double* x, double* y, int n) { map_v<exp8, d::exp_core>(x, y, n); }
void sigmoid_v_avx512(const double* x, double* y, int n) { map_v<sigmoid8, d::sigmoid_core>(x, y, n); }
void tanh_v_avx512(const double* x, double* y, int n) { map_v<tanh8, d::tanh_core>(x, y, n); }

void mul_v_avx512(const double* a, const double* b, double* y, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(y + i, _mm512_mul_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}

void madd_v_avx512(const double* a, const double* b, double* y, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d prod = _mm512_mul_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i));
    _mm512_storeu_pd(y + i, _mm512_add_pd(_mm512_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a[i] * b[i];
}

void add_v_avx512(const double* a, const double* b, double* y, int n) {
  int i = 0;
  for (; i + 8 <= n; i += 8)
    _mm512_storeu_pd(y + i, _mm512_add_pd(_mm512_loadu_pd(a + i), _mm512_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}

void lstm_point_fwd_avx512(int n, double* gi, double* gf, double* go, double* gg,
                         const double* c_prev, double* c, double* tanh_c, double* h) {
  int j = 0;
  for (; j + 8 <= n; j += 8) {
    const auto i_ = sigmoid8(_mm512_loadu_pd(gi + j));
    const auto f_ = sigmoid8(_mm512_loadu_pd(gf + j));
    const auto o_ = sigmoid8(_mm512_loadu_pd(go + j));
    const auto g_ = tanh8(_mm512_loadu_pd(gg + j));
    _mm512_storeu_pd(gi + j, i_);
    _mm512_storeu_pd(gf + j, f_);
    _mm512_storeu_pd(go + j, o_);
    _mm512_storeu_pd(gg + j, g_);
    const auto cp = _mm512_loadu_pd(c_prev + j);
    const auto cc = _mm512_add_pd(_mm512_mul_pd(f_, cp), _mm512_mul_pd(i_, g_));
    const auto tc = tanh8(cc);
    _mm512_storeu_pd(c + j, cc);
    _mm512_storeu_pd(tanh_c + j, tc);
    _mm512_storeu_pd(h + j, _mm512_mul_pd(o_, tc));
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

void lstm_point_bwd_avx512(int n, const double* gi, const double* gf, const double* go,
                         const double* gg, const double* tanh_c, const double* c_prev,
                         const double* dh, const double* dc_in, double* dgi,
                         double* dgf, double* dgo, double* dgg, double* dc_prev) {
  const __m512d one = _mm512_set1_pd(1.0);
  int j = 0;
  for (; j + 8 <= n; j += 8) {
    const auto i_ = _mm512_loadu_pd(gi + j);
    const auto f_ = _mm512_loadu_pd(gf + j);
    const auto o_ = _mm512_loadu_pd(go + j);
    const auto g_ = _mm512_loadu_pd(gg + j);
    const auto tc = _mm512_loadu_pd(tanh_c + j);
    const auto dh_ = _mm512_loadu_pd(dh + j);
    const auto cp = _mm512_loadu_pd(c_prev + j);
    const auto w1 = _mm512_mul_pd(dh_, o_);
    const auto w3 = _mm512_sub_pd(one, _mm512_mul_pd(tc, tc));
    const auto dct = _mm512_add_pd(_mm512_mul_pd(w1, w3), _mm512_loadu_pd(dc_in + j));
    _mm512_storeu_pd(dgi + j, _mm512_mul_pd(_mm512_mul_pd(dct, g_), _mm512_mul_pd(i_, _mm512_sub_pd(one, i_))));
    _mm512_storeu_pd(dgf + j, _mm512_mul_pd(_mm512_mul_pd(dct, cp), _mm512_mul_pd(f_, _mm512_sub_pd(one, f_))));
    _mm512_storeu_pd(dgo + j, _mm512_mul_pd(_mm512_mul_pd(dh_, tc), _mm512_mul_pd(o_, _mm512_sub_pd(one, o_))));
    _mm512_storeu_pd(dgg + j, _mm512_mul_pd(_mm512_mul_pd(dct, i_), _mm512_sub_pd(one, _mm512_mul_pd(g_, g_))));
    _mm512_storeu_pd(dc_prev + j, _mm512_mul_pd(dct, f_));
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

const Kernels kAvx512Kernels = {
    "avx512",         gemm_nn_avx512, gemm_tn_avx512, exp_v_avx512,
    sigmoid_v_avx512, tanh_v_avx512,  mul_v_avx512,   madd_v_avx512,
    add_v_avx512,     lstm_point_fwd_avx512, lstm_point_bwd_avx512,
};

} // namespace banet::kern

#endif // __AVX512F__ && __AVX512DQ__
