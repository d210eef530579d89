// Throughput comparison of the kernel-sum backends, used to sanity
// check that the runtime dispatch picks a sensible default.
//
//   bench_kernels [n_train] [n_eval] [iters]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "tsiv/kernels.hpp"
#include "tsiv/rng.hpp"

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 4000;
  const std::size_t m = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 4000;
  const int iters = argc > 3 ? std::atoi(argv[3]) : 20;

  tsiv::Rng rng(42);
  std::vector<double> t(n), y(n), w(n), x(m), num(m), den(m);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = rng.normal();
    y[i] = rng.normal();
    w[i] = 1.0 + rng.uniform01();
  }
  for (std::size_t j = 0; j < m; ++j) x[j] = rng.normal();
  const double h = 0.2;

  std::printf("n=%zu m=%zu iters=%d (default backend: %s)\n", n, m, iters,
              tsiv::kernels::impl_name(tsiv::kernels::active_impl()));

  const tsiv::kernels::Impl impls[] = {tsiv::kernels::Impl::scalar,
                                       tsiv::kernels::Impl::avx2,
                                       tsiv::kernels::Impl::avx512};
  for (tsiv::kernels::Impl impl : impls) {
    if (!tsiv::kernels::impl_available(impl)) {
      std::printf("%-8s unavailable\n", tsiv::kernels::impl_name(impl));
      continue;
    }
    tsiv::kernels::kernel_sums_impl(impl, t.data(), y.data(), w.data(), n, h,
                                    x.data(), m, num.data(), den.data());
    const auto t0 = std::chrono::steady_clock::now();
    for (int it = 0; it < iters; ++it)
      tsiv::kernels::kernel_sums_impl(impl, t.data(), y.data(), w.data(), n, h,
                                      x.data(), m, num.data(), den.data());
    const auto t1 = std::chrono::steady_clock::now();
    const double secs = std::chrono::duration<double>(t1 - t0).count();
    const double evals =
        static_cast<double>(n) * static_cast<double>(m) * iters;
    double checksum = 0.0;
    for (std::size_t j = 0; j < m; ++j) checksum += num[j] + den[j];
    std::printf("%-8s %8.3f s   %10.1f Meval/s   checksum %.12e\n",
                tsiv::kernels::impl_name(impl), secs, evals / secs / 1e6,
                checksum);
  }
  return 0;
}
