#include <cstdlib>
#include <string>

#include "tsiv/kernels.hpp"

namespace tsiv::kernels {

namespace {

Impl resolve() {
  Impl best = Impl::scalar;
  if (impl_available(Impl::avx2)) best = Impl::avx2;
  if (impl_available(Impl::avx512)) best = Impl::avx512;
  if (const char* env = std::getenv("TSIV_SIMD")) {
    const std::string want = env;
    if (want == "scalar") return Impl::scalar;
    if (want == "avx2" && impl_available(Impl::avx2)) return Impl::avx2;
    if (want == "avx512" && impl_available(Impl::avx512)) return Impl::avx512;
  }
  return best;
}

}  // namespace

bool impl_available(Impl impl) {
  switch (impl) {
    case Impl::scalar:
      return true;
#ifdef TSIV_HAVE_X86_KERNELS
    case Impl::avx2:
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Impl::avx512:
      return __builtin_cpu_supports("avx512f");
#else
    case Impl::avx2:
    case Impl::avx512:
      return false;
#endif
  }
  return false;
}

const char* impl_name(Impl impl) {
  switch (impl) {
    case Impl::scalar: return "scalar";
    case Impl::avx2: return "avx2";
    case Impl::avx512: return "avx512";
  }
  return "unknown";
}

Impl active_impl() {
  static const Impl impl = resolve();
  return impl;
}

void kernel_sums_impl(Impl impl, const double* t, const double* y,
                      const double* w, std::size_t n, double h,
                      const double* x, std::size_t m, double* num,
                      double* den) {
  switch (impl) {
    case Impl::scalar:
      detail::kernel_sums_scalar(t, y, w, n, h, x, m, num, den);
      return;
#ifdef TSIV_HAVE_X86_KERNELS
    case Impl::avx2:
      detail::kernel_sums_avx2(t, y, w, n, h, x, m, num, den);
      return;
    case Impl::avx512:
      detail::kernel_sums_avx512(t, y, w, n, h, x, m, num, den);
      return;
#else
    default:
      detail::kernel_sums_scalar(t, y, w, n, h, x, m, num, den);
      return;
#endif
  }
}

void kernel_sums(const double* t, const double* y, const double* w,
                 std::size_t n, double h, const double* x, std::size_t m,
                 double* num, double* den) {
  kernel_sums_impl(active_impl(), t, y, w, n, h, x, m, num, den);
}

}  // namespace tsiv::kernels
