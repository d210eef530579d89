#pragma once

#include <cstddef>
#include <vector>

#include "tsiv/core.hpp"
#include "tsiv/inference.hpp"

namespace tsiv {

// Per-nuisance bandwidth overrides; entries <= 0 fall back to the
// Silverman rule on the relevant sample.
struct MarBandwidths {
  double pooled_density = 0.0;  // treatment density over the pooled sample
  double cond_a = 0.0;          // treatment kernel in the conditional fit
  double cond_z = 0.0;          // instrument kernel (continuous only)
  double projection = 0.0;      // smoothing of the projected means on A
  double outcome = 0.0;         // smoothing of Y on A over the primary rows
};

struct MarConfig {
  std::size_t a_grid_size = 512;  // trapezoid grid covering the pooled A range
  bool z_is_binary = false;
  MarBandwidths bandwidths;
};

// Fitted map z -> E(A | Z = z), built from the pooled treatment
// density and the instrument law among rows missing the outcome.
// Heavy sums are folded into per-row coefficients at fit time, so
// each query costs one pass over the instrument sample.
class ConditionalMeanFit {
 public:
  // Throws EstimationError("instrument value outside estimable
  // range") when the instrument density at a query is below 1e-12;
  // for a binary instrument, queries must be exactly 0 or 1.
  double evaluate_one(double z) const;
  std::vector<double> evaluate(const std::vector<double>& z) const;

  // Instrument density (mass for binary instruments) at a query.
  double instrument_density(double z) const;

  double pooled_mean() const { return pooled_mean_; }

 private:
  friend ConditionalMeanFit fit_e_a_given_z(const TwoSampleDataset&,
                                            const MarConfig&);
  bool binary_ = false;
  // Binary branch: per-level probability mass and conditional mean.
  double mass_[2] = {0.0, 0.0};
  double cond_mean_[2] = {0.0, 0.0};
  // Continuous branch: instrument values with numerator/denominator
  // coefficients; query sums are kernel-weighted over these.
  std::vector<double> z_train_;
  std::vector<double> num_coef_;
  std::vector<double> den_coef_;
  double z_bandwidth_ = 0.0;
  double pooled_mean_ = 0.0;
};

ConditionalMeanFit fit_e_a_given_z(const TwoSampleDataset& ds,
                                   const MarConfig& cfg = {});

// Convenience wrapper: fit once, evaluate at the given queries.
std::vector<double> estimate_e_a_given_z(const TwoSampleDataset& ds,
                                         const std::vector<double>& z_query,
                                         const MarConfig& cfg = {});

// Treatment-effect estimate when the outcome's missingness depends on
// the treatment: projects the conditional means E(A|Z) back onto A
// over the outcome-missing rows, smooths Y on A over the
// outcome-observed rows, and regresses the smoothed outcome on
// (1, g(A), control term) across the pooled treatment sample.
EstimateReport estimate_alpha_mar(const TwoSampleDataset& ds,
                                  const BasisSpec& basis,
                                  const MarConfig& cfg = {});

// Percentile bootstrap for the missing-at-random estimator: both
// samples resampled independently, the whole pipeline rerun per
// replicate.  Same summary and failure accounting as
// bootstrap_inference.
InferenceReport bootstrap_inference_mar(const TwoSampleDataset& ds,
                                        const BasisSpec& basis,
                                        const BootstrapConfig& cfg,
                                        const MarConfig& mar_cfg = {},
                                        unsigned threads = 1);

}  // namespace tsiv
