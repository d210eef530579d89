#pragma once

#include <cstddef>

namespace tsiv::kernels {

// Gaussian kernel accumulation, the hot loop behind every smoother in
// the library.  For each evaluation point x[j]:
//
//   den[j] = sum_i w_i *       exp(-0.5 * ((x[j] - t[i]) / h)^2)
//   num[j] = sum_i w_i * y_i * exp(-0.5 * ((x[j] - t[i]) / h)^2)
//
// w == nullptr means unit weights.  y == nullptr skips num (density
// mode); num may then be null.  Within one implementation the inner
// sums run in a fixed order, so results are reproducible.
void kernel_sums(const double* t, const double* y, const double* w,
                 std::size_t n, double h, const double* x, std::size_t m,
                 double* num, double* den);

enum class Impl { scalar, avx2, avx512 };

const char* impl_name(Impl impl);

// Implementation picked at startup: the widest lane the CPU supports,
// unless the TSIV_SIMD environment variable (scalar|avx2|avx512)
// narrows it.
Impl active_impl();

bool impl_available(Impl impl);

// Direct entry used by the equivalence tests and the benchmark.
void kernel_sums_impl(Impl impl, const double* t, const double* y,
                      const double* w, std::size_t n, double h,
                      const double* x, std::size_t m, double* num,
                      double* den);

namespace detail {
void kernel_sums_scalar(const double* t, const double* y, const double* w,
                        std::size_t n, double h, const double* x,
                        std::size_t m, double* num, double* den);
#ifdef TSIV_HAVE_X86_KERNELS
void kernel_sums_avx2(const double* t, const double* y, const double* w,
                      std::size_t n, double h, const double* x, std::size_t m,
                      double* num, double* den);
void kernel_sums_avx512(const double* t, const double* y, const double* w,
                        std::size_t n, double h, const double* x,
                        std::size_t m, double* num, double* den);
#endif
}  // namespace detail

}  // namespace tsiv::kernels
