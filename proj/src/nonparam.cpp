#include "tsiv/nonparam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tsiv/errors.hpp"
#include "tsiv/kernels.hpp"

namespace tsiv {

namespace detail {

namespace {
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}

double weighted_sum(const std::vector<double>& counts, std::size_t n) {
  if (counts.empty()) return static_cast<double>(n);
  double total = 0.0;
  for (double c : counts) total += c;
  return total;
}

double expanded_quantile_sorted(const std::vector<double>& x,
                                const std::vector<double>& counts, double p) {
  const double total = weighted_sum(counts, x.size());
  const double pos = p * (total - 1.0);
  const double lo_rank = std::floor(pos);
  const double frac = pos - lo_rank;

  // Walk the cumulative counts once; groups are ascending in x.
  auto value_at_rank = [&](double rank) {
    double cum = 0.0;
    for (std::size_t g = 0; g < x.size(); ++g) {
      cum += counts.empty() ? 1.0 : counts[g];
      if (rank < cum) return x[g];
    }
    return x.back();
  };

  const double lo = value_at_rank(lo_rank);
  if (frac == 0.0) return lo;
  const double hi = value_at_rank(lo_rank + 1.0);
  return lo + frac * (hi - lo);
}

namespace {

// min(sd, IQR/1.34) and the expanded size, shared by both
// rule-of-thumb bandwidths.
double robust_spread_sorted(const std::vector<double>& x,
                            const std::vector<double>& counts,
                            double& total_out) {
  const double total = weighted_sum(counts, x.size());
  if (total < 2.0)
    throw std::invalid_argument("bandwidth selection: need at least 2 observations");

  double mean = 0.0;
  for (std::size_t g = 0; g < x.size(); ++g)
    mean += (counts.empty() ? 1.0 : counts[g]) * x[g];
  mean /= total;
  double ss = 0.0;
  for (std::size_t g = 0; g < x.size(); ++g) {
    const double d = x[g] - mean;
    ss += (counts.empty() ? 1.0 : counts[g]) * d * d;
  }
  const double sd = std::sqrt(ss / (total - 1.0));

  const double iqr = expanded_quantile_sorted(x, counts, 0.75) -
                     expanded_quantile_sorted(x, counts, 0.25);
  double spread = iqr / 1.34;
  if (!(spread > 0.0) || sd < spread) spread = sd;
  if (!(spread > 0.0) || !std::isfinite(spread))
    throw EstimationError("zero-spread sample");
  total_out = total;
  return spread;
}

}  // namespace

double silverman_weighted_sorted(const std::vector<double>& x,
                                 const std::vector<double>& counts) {
  double total = 0.0;
  const double spread = robust_spread_sorted(x, counts, total);
  return 1.06 * spread * std::pow(total, -0.2);
}

double undersmoothed_weighted_sorted(const std::vector<double>& x,
                                     const std::vector<double>& counts) {
  double total = 0.0;
  const double spread = robust_spread_sorted(x, counts, total);
  return 1.06 * spread * std::pow(total, -0.3);
}

std::vector<double> nw_eval_weighted(const std::vector<double>& x_train,
                                     const std::vector<double>& y_train,
                                     const std::vector<double>& counts,
                                     double bandwidth,
                                     std::vector<double> x_eval) {
  const auto [lo_it, hi_it] = std::minmax_element(x_train.begin(), x_train.end());
  const double lo = *lo_it, hi = *hi_it;
  for (double& x : x_eval) x = std::clamp(x, lo, hi);

  const std::size_t m = x_eval.size();
  std::vector<double> num(m), den(m);
  kernels::kernel_sums(x_train.data(), y_train.data(),
                       counts.empty() ? nullptr : counts.data(),
                       x_train.size(), bandwidth, x_eval.data(), m, num.data(),
                       den.data());

  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (den[j] > 0.0) {
      out[j] = num[j] / den[j];
    } else {
      // All weights underflowed: fall back to the nearest neighbour,
      // first match wins so the result is order-deterministic.
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < x_train.size(); ++i) {
        const double dist = std::abs(x_eval[j] - x_train[i]);
        if (dist < best_dist) {
          best_dist = dist;
          best = i;
        }
      }
      out[j] = y_train[best];
    }
  }
  return out;
}

std::vector<double> kde_weighted(const std::vector<double>& x_train,
                                 const std::vector<double>& counts,
                                 double bandwidth,
                                 const std::vector<double>& x_eval) {
  const double total = weighted_sum(counts, x_train.size());
  std::vector<double> den(x_eval.size());
  kernels::kernel_sums(x_train.data(), nullptr,
                       counts.empty() ? nullptr : counts.data(),
                       x_train.size(), bandwidth, x_eval.data(), x_eval.size(),
                       nullptr, den.data());
  const double scale = kInvSqrt2Pi / (total * bandwidth);
  for (double& d : den) d *= scale;
  return den;
}

std::vector<double> kernel_sum_weighted(const std::vector<double>& x_train,
                                        const std::vector<double>& weights,
                                        double bandwidth,
                                        const std::vector<double>& x_eval) {
  std::vector<double> den(x_eval.size());
  kernels::kernel_sums(x_train.data(), nullptr,
                       weights.empty() ? nullptr : weights.data(),
                       x_train.size(), bandwidth, x_eval.data(), x_eval.size(),
                       nullptr, den.data());
  return den;
}

double resolve_bandwidth(const BandwidthSpec& spec, const std::vector<double>& x,
                         const std::vector<double>& y,
                         const std::vector<double>& counts) {
  switch (spec.kind) {
    case BandwidthSpec::Kind::fixed:
      if (!(spec.value > 0.0) || !std::isfinite(spec.value))
        throw std::invalid_argument("bandwidth must be positive and finite");
      return spec.value;
    case BandwidthSpec::Kind::loocv: {
      std::vector<double> grid = spec.grid;
      if (grid.empty()) {
        const double pilot = silverman_weighted_sorted(x, counts);
        for (int k = -4; k <= 4; ++k)
          grid.push_back(pilot * std::pow(2.0, 0.5 * k));
      }
      return loocv_weighted(x, y, counts, grid);
    }
    case BandwidthSpec::Kind::silverman:
      return silverman_weighted_sorted(x, counts);
    case BandwidthSpec::Kind::undersmoothed:
      break;
  }
  return undersmoothed_weighted_sorted(x, counts);
}

double loocv_weighted(const std::vector<double>& x,
                      const std::vector<double>& y,
                      const std::vector<double>& counts,
                      const std::vector<double>& grid) {
  if (grid.empty())
    throw std::invalid_argument("loocv_bandwidth: empty candidate grid");
  std::vector<double> candidates = grid;
  std::sort(candidates.begin(), candidates.end());

  const std::size_t n = x.size();
  std::vector<double> num(n), den(n);
  double best_h = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  for (const double h : candidates) {
    if (!(h > 0.0) || !std::isfinite(h))
      throw std::invalid_argument("loocv_bandwidth: bandwidths must be positive");
    kernels::kernel_sums(x.data(), y.data(),
                         counts.empty() ? nullptr : counts.data(), n, h,
                         x.data(), n, num.data(), den.data());
    double score = 0.0;
    bool defined = true;
    for (std::size_t i = 0; i < n; ++i) {
      // Leave out a single copy of observation i; its own kernel
      // weight is exactly one.
      const double loo_den = den[i] - 1.0;
      if (loo_den <= 1e-12) {
        defined = false;
        break;
      }
      const double pred = (num[i] - y[i]) / loo_den;
      const double resid = y[i] - pred;
      score += (counts.empty() ? 1.0 : counts[i]) * resid * resid;
    }
    if (defined && score < best_score) {
      best_score = score;
      best_h = h;
    }
  }
  if (!(best_h > 0.0)) throw EstimationError("cv-degenerate");
  return best_h;
}

}  // namespace detail

double silverman_bandwidth(const std::vector<double>& x) {
  if (x.size() < 2)
    throw std::invalid_argument("silverman_bandwidth: need at least 2 observations");
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  return detail::silverman_weighted_sorted(sorted, {});
}

double undersmoothed_bandwidth(const std::vector<double>& x) {
  if (x.size() < 2)
    throw std::invalid_argument("undersmoothed_bandwidth: need at least 2 observations");
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  return detail::undersmoothed_weighted_sorted(sorted, {});
}

double loocv_bandwidth(const std::vector<double>& x,
                       const std::vector<double>& y,
                       const std::vector<double>& grid) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("loocv_bandwidth: need matched samples of size >= 2");
  return detail::loocv_weighted(x, y, {}, grid);
}

std::vector<double> nw_regress(const KernelFit& fit,
                               const std::vector<double>& x_eval) {
  if (fit.x_train.size() != fit.y_train.size() || fit.x_train.size() < 2)
    throw std::invalid_argument("nw_regress: need matched training samples of size >= 2");
  if (!fit.counts.empty() && fit.counts.size() != fit.x_train.size())
    throw std::invalid_argument("nw_regress: counts length mismatch");
  if (!(fit.bandwidth > 0.0) || !std::isfinite(fit.bandwidth))
    throw std::invalid_argument("nw_regress: bandwidth must be positive and finite");
  return detail::nw_eval_weighted(fit.x_train, fit.y_train, fit.counts,
                                  fit.bandwidth, x_eval);
}

std::vector<double> kde_univariate(const std::vector<double>& x_train,
                                   double bandwidth,
                                   const std::vector<double>& x_eval) {
  if (x_train.empty())
    throw std::invalid_argument("kde_univariate: empty training sample");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("kde_univariate: bandwidth must be positive and finite");
  return detail::kde_weighted(x_train, {}, bandwidth, x_eval);
}

}  // namespace tsiv
