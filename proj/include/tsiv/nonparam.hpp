#pragma once

#include <cstddef>
#include <vector>

namespace tsiv {

// A fitted Gaussian-kernel regression: training points, responses,
// optional replication counts (empty means every row counts once),
// and the bandwidth.  Evaluation is deferred to nw_regress.
struct KernelFit {
  std::vector<double> x_train;
  std::vector<double> y_train;
  std::vector<double> counts;  // empty or same length as x_train
  double bandwidth = 0.0;
};

// Rule-of-thumb bandwidth 1.06 * min(sd, IQR/1.34) * n^(-1/5) with
// type-7 quantiles.  A zero IQR falls back to the standard deviation;
// throws EstimationError("zero-spread sample") when that is zero too.
// Requires at least two observations.
double silverman_bandwidth(const std::vector<double>& x);

// Same robust scale at the faster n^(-3/10) rate.  Smoothers feeding a
// root-n estimator need their squared bias to vanish faster than
// n^(-1/2); the Silverman rate leaves a first-order smoothing bias in
// the downstream coefficients, so this rule is the default there.
double undersmoothed_bandwidth(const std::vector<double>& x);

// Leave-one-out cross-validation over a candidate grid: picks the
// bandwidth minimising the summed squared LOO prediction error, ties
// broken toward the smaller value.  Throws
// EstimationError("cv-degenerate") when no candidate yields a defined
// score (isolated points whose kernel weights all underflow).
double loocv_bandwidth(const std::vector<double>& x,
                       const std::vector<double>& y,
                       const std::vector<double>& grid);

// Nadaraya-Watson regression at each evaluation point.  Points are
// clamped to the training range first.  Where the kernel mass
// underflows to zero the nearest training response is returned.
std::vector<double> nw_regress(const KernelFit& fit,
                               const std::vector<double>& x_eval);

// Gaussian kernel density estimate evaluated pointwise.
std::vector<double> kde_univariate(const std::vector<double>& x_train,
                                   double bandwidth,
                                   const std::vector<double>& x_eval);

// How a smoother's bandwidth is chosen: the undersmoothed rule
// (default), the Silverman rule, a fixed value, or leave-one-out
// cross-validation over a grid (the default grid is geometric around
// the Silverman value).
struct BandwidthSpec {
  enum class Kind { undersmoothed, silverman, fixed, loocv };
  Kind kind = Kind::undersmoothed;
  double value = 0.0;          // fixed only
  std::vector<double> grid;    // loocv only; empty selects the default grid
};

namespace detail {

// Resolves a spec against a concrete (possibly replicated) sample;
// x ascending when counts are present.
double resolve_bandwidth(const BandwidthSpec& spec,
                         const std::vector<double>& x,
                         const std::vector<double>& y,
                         const std::vector<double>& counts);

}  // namespace detail

namespace detail {

// Shared weighted cores.  `counts` may be empty (unit weights); when
// present its entries are positive replication counts and `x` must be
// ascending where noted.

double weighted_sum(const std::vector<double>& counts, std::size_t n);

// Order statistic of the expanded multiset; x ascending.
double expanded_quantile_sorted(const std::vector<double>& x,
                                const std::vector<double>& counts, double p);

// Rule-of-thumb bandwidths over a replicated sample; x ascending.
double silverman_weighted_sorted(const std::vector<double>& x,
                                 const std::vector<double>& counts);
double undersmoothed_weighted_sorted(const std::vector<double>& x,
                                     const std::vector<double>& counts);

double loocv_weighted(const std::vector<double>& x,
                      const std::vector<double>& y,
                      const std::vector<double>& counts,
                      const std::vector<double>& grid);

std::vector<double> nw_eval_weighted(const std::vector<double>& x_train,
                                     const std::vector<double>& y_train,
                                     const std::vector<double>& counts,
                                     double bandwidth,
                                     std::vector<double> x_eval);

// sum_i counts_i * K_h(x_eval_j - x_train_i), normalised so the
// result is a density when counts sum to the sample size.
std::vector<double> kde_weighted(const std::vector<double>& x_train,
                                 const std::vector<double>& counts,
                                 double bandwidth,
                                 const std::vector<double>& x_eval);

// Raw weighted kernel sums without density normalisation.
std::vector<double> kernel_sum_weighted(const std::vector<double>& x_train,
                                        const std::vector<double>& weights,
                                        double bandwidth,
                                        const std::vector<double>& x_eval);

}  // namespace detail

}  // namespace tsiv
