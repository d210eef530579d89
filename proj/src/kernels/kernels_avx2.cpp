#include <immintrin.h>

#include <cmath>

#include "tsiv/kernels.hpp"

namespace tsiv::kernels::detail {
namespace {

// exp on four doubles: reduce x = n*ln2 + r with ln2 split in two
// pieces, evaluate the rational approximation
//   exp(r) = 1 + 2*r*P(r^2) / (Q(r^2) - r*P(r^2))
// on |r| <= ln2/2, then scale by 2^n through the exponent field.
// Arguments below the normal range flush to zero, which is exactly
// what a vanished kernel weight should do.
inline __m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d keep = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_GT_OQ);
  x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);
  const __m256d rr = _mm256_mul_pd(r, r);

  __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, r);

  __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000005e0));

  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
  e = _mm256_mul_pd(e, _mm256_castsi256_pd(n64));

  return _mm256_and_pd(e, keep);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

template <bool HasY, bool HasW>
void run(const double* t, const double* y, const double* w, std::size_t n,
         double h, const double* x, std::size_t m, double* num, double* den) {
  const double inv_h = 1.0 / h;
  const __m256d vinv_h = _mm256_set1_pd(inv_h);
  const __m256d vneg_half = _mm256_set1_pd(-0.5);
  for (std::size_t j = 0; j < m; ++j) {
    const __m256d vx = _mm256_set1_pd(x[j]);
    __m256d vden = _mm256_setzero_pd();
    __m256d vnum = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      const __m256d u =
          _mm256_mul_pd(_mm256_sub_pd(vx, _mm256_loadu_pd(t + i)), vinv_h);
      __m256d k = exp4(_mm256_mul_pd(vneg_half, _mm256_mul_pd(u, u)));
      if constexpr (HasW) k = _mm256_mul_pd(k, _mm256_loadu_pd(w + i));
      vden = _mm256_add_pd(vden, k);
      if constexpr (HasY) vnum = _mm256_fmadd_pd(k, _mm256_loadu_pd(y + i), vnum);
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

void kernel_sums_avx2(const double* t, const double* y, const double* w,
                      std::size_t n, double h, const double* x, std::size_t m,
                      double* num, double* den) {
  if (y) {
    if (w) run<true, true>(t, y, w, n, h, x, m, num, den);
    else   run<true, false>(t, y, w, n, h, x, m, num, den);
  } else {
    if (w) run<false, true>(t, y, w, n, h, x, m, num, den);
    else   run<false, false>(t, y, w, n, h, x, m, num, den);
  }
}

}  // namespace tsiv::kernels::detail
