#pragma once

#include <vector>

#include "tsiv/core.hpp"
#include "tsiv/nonparam.hpp"

namespace tsiv {

// First-stage linear model of the treatment on the instrument.
struct TreatmentModel {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
};

// Everything needed to evaluate the control term
//   C_hat(a) = a - gamma0 - gamma1 * E_hat(Z | A = a)
// at arbitrary treatment values: the treatment model, the smoother of
// Z on A fitted over the auxiliary sample, and that sample's range.
struct ControlProjection {
  TreatmentModel treatment_model;
  KernelFit ez_given_a;
  double support_lo = 0.0;
  double support_hi = 0.0;
};

// OLS of A on (1, Z) over the auxiliary sample.  Throws
// EstimationError("degenerate instrument") when Z is constant.
TreatmentModel fit_treatment_model(const std::vector<AuxiliaryRow>& aux);

// Fits the smoother of Z on A and packages the control term.  The
// bandwidth spec defaults to the undersmoothed rule on auxiliary A.
ControlProjection fit_control_projection(const std::vector<AuxiliaryRow>& aux,
                                         const TreatmentModel& tm,
                                         const BandwidthSpec& bandwidth = {});

// C_hat at each point.  The smoother input is clamped to the
// auxiliary range; the leading identity term is not.
std::vector<double> evaluate_control_projection(const ControlProjection& cp,
                                                const std::vector<double>& a);

// Least squares of Y on (1, g(A), C_hat(A)) over the primary sample.
// alpha_hat are the coefficients on g, xi_hat the one on C_hat.
// Throws EstimationError("Assumption 1 violated in sample") when the
// design is rank-deficient.  Invariant to row order in both samples.
EstimateReport estimate_alpha(const std::vector<PrimaryRow>& primary,
                              const ControlProjection& cp,
                              const BasisSpec& basis);

// Condition number (ratio of extreme singular values) of the sample
// second-moment matrix of (1, g(A), C_hat(A)) over primary rows.
// Returns +infinity on exact singularity instead of throwing.
double assumption1_diagnostic(const std::vector<PrimaryRow>& primary,
                              const ControlProjection& cp,
                              const BasisSpec& basis);

struct FullDataEstimate {
  std::vector<double> alpha;
  double rho = 0.0;
  double intercept = 0.0;
};

// Classical control-function estimator for fully observed rows:
// OLS of A on (1, Z), then OLS of Y on (1, g(A), residual).  Throws
// EstimationError("degenerate design") on rank deficiency.
FullDataEstimate full_data_cf_estimate(const std::vector<JointRow>& joint,
                                       const BasisSpec& basis);

namespace detail {

// Weighted building blocks shared with the bootstrap and simulation
// drivers.  Arrays follow the GroupedPairs layout: key = treatment,
// ascending; counts empty means unit weights.

TreatmentModel treatment_from_grouped(const std::vector<double>& a,
                                      const std::vector<double>& z,
                                      const std::vector<double>& counts);

ControlProjection projection_from_grouped(std::vector<double> a,
                                          std::vector<double> z,
                                          std::vector<double> counts,
                                          const TreatmentModel& tm,
                                          const BandwidthSpec& bandwidth);

struct PrimaryFit {
  std::vector<double> alpha;
  double xi = 0.0;
  double intercept = 0.0;
  double cond = 0.0;  // populated when requested
};

PrimaryFit fit_primary_grouped(const ControlProjection& cp,
                               const std::vector<double>& a,
                               const std::vector<double>& y,
                               const std::vector<double>& counts,
                               const BasisSpec& basis, bool want_cond);

}  // namespace detail

}  // namespace tsiv
