#include <cmath>

#include "tsiv/kernels.hpp"

namespace tsiv::kernels::detail {

// Reference implementation: plain loops and std::exp.  The SIMD lanes
// are tested for agreement against this one.
void kernel_sums_scalar(const double* t, const double* y, const double* w,
                        std::size_t n, double h, const double* x,
                        std::size_t m, double* num, double* den) {
  const double inv_h = 1.0 / h;
  for (std::size_t j = 0; j < m; ++j) {
    const double xj = x[j];
    double acc_den = 0.0;
    double acc_num = 0.0;
    if (y == nullptr) {
      if (w == nullptr) {
        for (std::size_t i = 0; i < n; ++i) {
          const double u = (xj - t[i]) * inv_h;
          acc_den += std::exp(-0.5 * u * u);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const double u = (xj - t[i]) * inv_h;
          acc_den += w[i] * std::exp(-0.5 * u * u);
        }
      }
    } else {
      if (w == nullptr) {
        for (std::size_t i = 0; i < n; ++i) {
          const double u = (xj - t[i]) * inv_h;
          const double k = std::exp(-0.5 * u * u);
          acc_den += k;
          acc_num += k * y[i];
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          const double u = (xj - t[i]) * inv_h;
          const double k = w[i] * std::exp(-0.5 * u * u);
          acc_den += k;
          acc_num += k * y[i];
        }
      }
      num[j] = acc_num;
    }
    den[j] = acc_den;
  }
}

}  // namespace tsiv::kernels::detail
