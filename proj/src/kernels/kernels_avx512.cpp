#include <immintrin.h>

#include <cmath>

#include "tsiv/kernels.hpp"

namespace tsiv::kernels::detail {
namespace {

// Eight-wide port of the AVX2 exp; see kernels_avx2.cpp for the
// derivation.  Uses only AVX-512F instructions.
inline __m512d exp8(__m512d x) {
  const __m512d log2e = _mm512_set1_pd(1.4426950408889634073599);
  const __m512d ln2_hi = _mm512_set1_pd(6.93145751953125e-1);
  const __m512d ln2_lo = _mm512_set1_pd(1.42860682030941723212e-6);

  const __mmask8 keep =
      _mm512_cmp_pd_mask(x, _mm512_set1_pd(-708.0), _CMP_GT_OQ);
  x = _mm512_max_pd(x, _mm512_set1_pd(-708.0));

  const __m512d n = _mm512_roundscale_pd(
      _mm512_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m512d r = _mm512_fnmadd_pd(n, ln2_hi, x);
  r = _mm512_fnmadd_pd(n, ln2_lo, r);
  const __m512d rr = _mm512_mul_pd(r, r);

  __m512d p = _mm512_set1_pd(1.26177193074810590878e-4);
  p = _mm512_fmadd_pd(p, rr, _mm512_set1_pd(3.02994407707441961300e-2));
  p = _mm512_fmadd_pd(p, rr, _mm512_set1_pd(9.99999999999999999910e-1));
  p = _mm512_mul_pd(p, r);

  __m512d q = _mm512_set1_pd(3.00198505138664455042e-6);
  q = _mm512_fmadd_pd(q, rr, _mm512_set1_pd(2.52448340349684104192e-3));
  q = _mm512_fmadd_pd(q, rr, _mm512_set1_pd(2.27265548208155028766e-1));
  q = _mm512_fmadd_pd(q, rr, _mm512_set1_pd(2.00000000000000000005e0));

  __m512d e = _mm512_div_pd(p, _mm512_sub_pd(q, p));
  e = _mm512_fmadd_pd(_mm512_set1_pd(2.0), e, _mm512_set1_pd(1.0));

  const __m256i n32 = _mm512_cvtpd_epi32(n);
  __m512i n64 = _mm512_cvtepi32_epi64(n32);
  n64 = _mm512_slli_epi64(_mm512_add_epi64(n64, _mm512_set1_epi64(1023)), 52);
  e = _mm512_mul_pd(e, _mm512_castsi512_pd(n64));

  return _mm512_maskz_mov_pd(keep, e);
}

inline double hsum(__m512d v) { return _mm512_reduce_add_pd(v); }

template <bool HasY, bool HasW>
void run(const double* t, const double* y, const double* w, std::size_t n,
         double h, const double* x, std::size_t m, double* num, double* den) {
  const double inv_h = 1.0 / h;
  const __m512d vinv_h = _mm512_set1_pd(inv_h);
  const __m512d vneg_half = _mm512_set1_pd(-0.5);
  for (std::size_t j = 0; j < m; ++j) {
    const __m512d vx = _mm512_set1_pd(x[j]);
    __m512d vden = _mm512_setzero_pd();
    __m512d vnum = _mm512_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
      const __m512d u =
          _mm512_mul_pd(_mm512_sub_pd(vx, _mm512_loadu_pd(t + i)), vinv_h);
      __m512d k = exp8(_mm512_mul_pd(vneg_half, _mm512_mul_pd(u, u)));
      if constexpr (HasW) k = _mm512_mul_pd(k, _mm512_loadu_pd(w + i));
      vden = _mm512_add_pd(vden, k);
      if constexpr (HasY) vnum = _mm512_fmadd_pd(k, _mm512_loadu_pd(y + i), vnum);
    }
    double acc_den = hsum(vden);
    double acc_num = HasY ? hsum(vnum) : 0.0;
    for (; i < n; ++i) {
      const double u = (x[j] - t[i]) * inv_h;
      double k = std::exp(-0.5 * u * u);
      if constexpr (HasW) k *= w[i];
      acc_den += k;
      if constexpr (HasY) acc_num += k * y[i];
    }
    den[j] = acc_den;
    if constexpr (HasY) num[j] = acc_num;
  }
}

}  // namespace

void kernel_sums_avx512(const double* t, const double* y, const double* w,
                        std::size_t n, double h, const double* x,
                        std::size_t m, double* num, double* den) {
  if (y) {
    if (w) run<true, true>(t, y, w, n, h, x, m, num, den);
    else   run<true, false>(t, y, w, n, h, x, m, num, den);
  } else {
    if (w) run<false, true>(t, y, w, n, h, x, m, num, den);
    else   run<false, false>(t, y, w, n, h, x, m, num, den);
  }
}

}  // namespace tsiv::kernels::detail
