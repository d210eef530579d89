#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsiv/core.hpp"
#include "tsiv/estimator.hpp"

namespace tsiv {

struct BootstrapConfig {
  std::size_t replicates = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  // Percentile intervals are the only supported type; the field is
  // kept so reports can echo it.
  std::string ci_type = "percentile";
};

inline constexpr std::array<double, 5> kReportQuantiles{0.025, 0.25, 0.5,
                                                        0.75, 0.975};

struct InferenceReport {
  std::string method;  // "bootstrap" | "asymptotic"
  std::vector<double> se;
  std::vector<double> ci_lower;
  std::vector<double> ci_upper;
  // Per coordinate: the 2.5/25/50/75/97.5 percentiles of the draws
  // (bootstrap only).
  std::vector<std::array<double, 5>> quantiles;
  double level = 0.95;
  std::size_t replicates_requested = 0;
  std::size_t replicates_failed = 0;
};

// Resamples both samples independently with replacement, reruns the
// full three-step fit (bandwidth selection included) per replicate,
// and summarises the alpha draws: per-coordinate SD, percentile CI at
// cfg.level, and the report quantiles.  Replicates that degenerate
// are dropped and counted; more than 5% of them raises
// EstimationError("bootstrap unstable").  Output depends only on
// (ds, basis, cfg, bandwidth), never on thread count.
InferenceReport bootstrap_inference(const TwoSampleDataset& ds,
                                    const BasisSpec& basis,
                                    const BootstrapConfig& cfg,
                                    const BandwidthSpec& bandwidth = {},
                                    unsigned threads = 1);

// Per-row moment vectors X_i = [vec(g g'), g*C, C^2] evaluated over
// the primary treatments, plus their mean.  The layout is the
// bijection detail::mu_to_gram / detail::gram_to_mu inverts.
std::pair<std::vector<double>, std::vector<std::vector<double>>> moment_vector(
    const std::vector<double>& primary_a, const ControlProjection& cp,
    const BasisSpec& basis);

// Plug-in sampling variance of alpha_hat: influence terms combining
// the cross-moment contribution with a finite-difference Jacobian of
// the moment-to-coefficient map, covaried over primary rows and
// scaled by 1/n2.  Throws EstimationError("Assumption 1 violated in
// sample") on a singular Gram and
// EstimationError("variance estimation failed") when the result is
// not PSD within tolerance.
std::vector<std::vector<double>> asymptotic_variance(
    const std::vector<PrimaryRow>& primary, const ControlProjection& cp,
    const BasisSpec& basis);

// Equal-tailed normal interval for one coordinate.
std::pair<double, double> wald_interval(double estimate, double se,
                                        double level);

namespace detail {

// X row for one observation, given its basis values and control term.
std::vector<double> assemble_moment_row(const std::vector<double>& g, double c);

// Moment layout bijection.  mu has length p^2 + p + 1; the matrix is
// the (p+1)x(p+1) symmetric second-moment matrix of (g, C).  The g
// block of mu carries p^2 entries (duplicates included); mu_to_gram
// symmetrises it.
Eigen::MatrixXd mu_to_gram(const Eigen::VectorXd& mu, std::size_t p);
Eigen::VectorXd gram_to_mu(const Eigen::MatrixXd& m);

// Jacobian of mu -> alpha(mu) = [D11(mu) D12(mu)] * [mgy; mcy] by
// central differences with per-coordinate step
// step_scale * max(1, |mu_j|).  Exposed so tests can halve the step.
Eigen::MatrixXd alpha_mu_jacobian(const Eigen::VectorXd& mu,
                                  const Eigen::VectorXd& mgy, double mcy,
                                  std::size_t p, double step_scale);

// Type-7 quantile of an unsorted sample (copies and sorts).
double sample_quantile(std::vector<double> draws, double prob);

// Shared bootstrap summary: per-coordinate SD, percentile CI, and
// report quantiles over the non-failed draws.  Throws
// EstimationError("bootstrap unstable") when more than 5% of draws
// failed or fewer than two succeeded.
InferenceReport summarize_bootstrap_draws(
    const std::vector<std::vector<double>>& draws,
    const std::vector<unsigned char>& failed, std::size_t p,
    const BootstrapConfig& cfg);

}  // namespace detail

}  // namespace tsiv
