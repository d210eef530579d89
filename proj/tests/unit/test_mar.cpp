#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tsiv/errors.hpp"
#include "tsiv/estimator.hpp"
#include "tsiv/inference.hpp"
#include "tsiv/mar.hpp"
#include "tsiv/sim.hpp"

namespace {

tsiv::MarConfig binary_cfg() {
  tsiv::MarConfig cfg;
  cfg.z_is_binary = true;
  return cfg;
}

// DGP whose instrument carries no information about the treatment.
tsiv::TwoSampleDataset independent_dataset(std::uint64_t seed, std::size_t n) {
  tsiv::DGPSpec spec;
  spec.gamma = 0.0;
  spec.z_dist = tsiv::Dist::normal01;
  spec.u_dist = tsiv::Dist::normal01;
  spec.n1 = n;
  spec.n2 = n;
  return tsiv::sample_dgp(spec, seed).ds;
}

double mean_treatment(const tsiv::TwoSampleDataset& ds) {
  double sum = 0.0;
  for (const auto& r : ds.aux) sum += r.a;
  for (const auto& r : ds.primary) sum += r.a;
  return sum / static_cast<double>(ds.aux.size() + ds.primary.size());
}

// Population cells of the enumerated DGP with stratum sizes chosen so
// missingness depends on the treatment while the pooled treatment law
// stays uniform over the four support points.
tsiv::TwoSampleDataset selection_weighted_discrete() {
  struct Cell {
    double z, a, y;
    std::size_t aux_count, primary_count;
  };
  const std::vector<Cell> cells{{0.0, -1.0, -2.0, 4000, 1000},
                                {0.0, 1.0, 2.0, 3000, 2000},
                                {1.0, 0.0, -1.0, 2000, 3000},
                                {1.0, 2.0, 3.0, 1000, 4000}};
  tsiv::TwoSampleDataset ds;
  for (const Cell& c : cells) {
    for (std::size_t i = 0; i < c.aux_count; ++i) ds.aux.push_back({c.z, c.a});
    for (std::size_t i = 0; i < c.primary_count; ++i)
      ds.primary.push_back({c.a, c.y});
  }
  return ds;
}

bool reports_equal(const tsiv::InferenceReport& a,
                   const tsiv::InferenceReport& b) {
  return a.method == b.method && a.se == b.se && a.ci_lower == b.ci_lower &&
         a.ci_upper == b.ci_upper && a.quantiles == b.quantiles &&
         a.level == b.level &&
         a.replicates_requested == b.replicates_requested &&
         a.replicates_failed == b.replicates_failed;
}

}  // namespace

TEST_CASE("conditional mean collapses to the pooled mean under independence") {
  const auto ds = independent_dataset(3, 5000);
  const auto fit = tsiv::fit_e_a_given_z(ds);

  CHECK(fit.pooled_mean() ==
        doctest::Approx(mean_treatment(ds)).epsilon(1e-9));
  for (double z : {-1.0, 0.0, 1.0}) {
    CHECK(std::abs(fit.evaluate_one(z) - fit.pooled_mean()) < 0.05);
    CHECK(fit.instrument_density(z) >= 0.0);
  }
}

TEST_CASE("binary conditional means recover the enumerated population") {
  const auto ds = tsiv::discrete_exact_sample(1250);
  const auto fit = tsiv::fit_e_a_given_z(ds, binary_cfg());

  CHECK(std::abs(fit.evaluate_one(0.0) - 0.0) < 0.05);
  CHECK(std::abs(fit.evaluate_one(1.0) - 1.0) < 0.05);

  const double d0 = fit.instrument_density(0.0);
  const double d1 = fit.instrument_density(1.0);
  CHECK(d0 == doctest::Approx(0.5).epsilon(0.04));
  CHECK(d1 == doctest::Approx(0.5).epsilon(0.04));
  CHECK(d0 + d1 == doctest::Approx(1.0).epsilon(1e-2));

  // Law of total expectation against the fit's own components.
  const double total =
      fit.evaluate_one(0.0) * d0 + fit.evaluate_one(1.0) * d1;
  CHECK(std::abs(total - fit.pooled_mean()) < 1e-2);
}

TEST_CASE("binary instrument queries and data are validated") {
  const auto ds = tsiv::discrete_exact_sample(10);
  const auto fit = tsiv::fit_e_a_given_z(ds, binary_cfg());
  CHECK_THROWS_AS((void)fit.evaluate_one(0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)fit.instrument_density(-1.0), std::invalid_argument);

  tsiv::TwoSampleDataset bad = ds;
  bad.aux[0].z = 0.3;
  CHECK_THROWS_AS((void)tsiv::fit_e_a_given_z(bad, binary_cfg()),
                  std::invalid_argument);
}

TEST_CASE("binary level with vanishing mass is outside the estimable range") {
  tsiv::TwoSampleDataset ds;
  for (int i = 0; i < 50; ++i) {
    const double a = 0.1 * i;
    ds.aux.push_back({0.0, a});
    ds.primary.push_back({a, a});
  }
  const auto fit = tsiv::fit_e_a_given_z(ds, binary_cfg());
  CHECK(fit.instrument_density(1.0) == 0.0);
  CHECK_THROWS_WITH_AS((void)fit.evaluate_one(1.0),
                       "instrument value outside estimable range",
                       tsiv::EstimationError);
  CHECK(fit.evaluate_one(0.0) ==
        doctest::Approx(fit.pooled_mean()).epsilon(1e-3));

  // A constant conditional mean leaves the control term collinear
  // with the treatment itself.
  CHECK_THROWS_WITH_AS(
      (void)tsiv::estimate_alpha_mar(ds, tsiv::BasisSpec{}, binary_cfg()),
      "Assumption 1 violated in sample", tsiv::EstimationError);
}

TEST_CASE("far continuous queries are rejected") {
  const auto ds = independent_dataset(7, 200);
  const auto fit = tsiv::fit_e_a_given_z(ds);
  CHECK(fit.instrument_density(1000.0) == 0.0);
  CHECK_THROWS_WITH_AS((void)fit.evaluate_one(1000.0),
                       "instrument value outside estimable range",
                       tsiv::EstimationError);
}

TEST_CASE("instrument density integrates to one") {
  const auto ds = independent_dataset(11, 2000);
  const auto fit = tsiv::fit_e_a_given_z(ds);

  double z_lo = ds.aux[0].z, z_hi = ds.aux[0].z;
  for (const auto& r : ds.aux) {
    z_lo = std::min(z_lo, r.z);
    z_hi = std::max(z_hi, r.z);
  }
  const std::size_t m = 3001;
  const double lo = z_lo - 2.0, hi = z_hi + 2.0;
  const double step = (hi - lo) / static_cast<double>(m - 1);
  double integral = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double f = fit.instrument_density(lo + static_cast<double>(j) * step);
    CHECK(f >= 0.0);
    integral += (j == 0 || j + 1 == m) ? 0.5 * f : f;
  }
  integral *= step;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("convenience wrapper matches fit-then-evaluate") {
  const auto ds = independent_dataset(3, 150);
  const std::vector<double> queries{-0.4, 0.0, 0.7};
  const auto direct = tsiv::estimate_e_a_given_z(ds, queries);
  const auto via_fit = tsiv::fit_e_a_given_z(ds).evaluate(queries);
  CHECK(direct == via_fit);
}

TEST_CASE("grid and bandwidth configuration is validated") {
  const auto ds = tsiv::discrete_exact_sample(10);

  tsiv::MarConfig small_grid;
  small_grid.a_grid_size = 8;
  CHECK_THROWS_WITH_AS((void)tsiv::fit_e_a_given_z(ds, small_grid),
                       "MAR grid size must be at least 16", tsiv::ConfigError);
  CHECK_THROWS_WITH_AS(
      (void)tsiv::estimate_alpha_mar(ds, tsiv::BasisSpec{}, small_grid),
      "MAR grid size must be at least 16", tsiv::ConfigError);

  tsiv::MarConfig bad_bw;
  bad_bw.bandwidths.outcome = std::nan("");
  CHECK_THROWS_WITH_AS((void)tsiv::fit_e_a_given_z(ds, bad_bw),
                       "MAR bandwidth overrides must be finite",
                       tsiv::ConfigError);
}

TEST_CASE("undersized samples are rejected") {
  tsiv::TwoSampleDataset ds;
  ds.aux = {{0.0, 1.0}};
  ds.primary = {{1.0, 2.0}, {2.0, 3.0}, {3.0, 4.0}};
  CHECK_THROWS_AS((void)tsiv::fit_e_a_given_z(ds), std::invalid_argument);
  CHECK_THROWS_AS((void)tsiv::estimate_alpha_mar(ds, tsiv::BasisSpec{}),
                  std::invalid_argument);

  tsiv::TwoSampleDataset thin;
  thin.aux = {{0.0, 1.0}, {1.0, 2.0}, {0.0, 3.0}};
  thin.primary = {{1.0, 2.0}, {2.0, 3.0}};
  CHECK_THROWS_AS((void)tsiv::estimate_alpha_mar(thin, tsiv::BasisSpec{}),
                  std::invalid_argument);
}

TEST_CASE("zero-spread pooled treatment is rejected") {
  tsiv::TwoSampleDataset ds;
  ds.aux = {{0.0, 1.0}, {1.0, 1.0}};
  ds.primary = {{1.0, 0.0}, {1.0, 1.0}, {1.0, 2.0}};
  CHECK_THROWS_WITH_AS((void)tsiv::fit_e_a_given_z(ds), "zero-spread sample",
                       tsiv::EstimationError);
}

TEST_CASE("selection-weighted discrete sample recovers the population") {
  const auto ds = selection_weighted_discrete();
  tsiv::MarConfig cfg = binary_cfg();
  cfg.bandwidths.pooled_density = 0.05;
  cfg.bandwidths.cond_a = 0.05;
  cfg.bandwidths.projection = 0.05;
  cfg.bandwidths.outcome = 0.05;

  const auto report = tsiv::estimate_alpha_mar(ds, tsiv::BasisSpec{}, cfg);
  REQUIRE(report.alpha_hat.size() == 1);
  CHECK(report.alpha_hat[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(report.xi_hat == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(report.intercept) < 1e-4);
  CHECK(report.variance.empty());

  CHECK(report.diagnostics.n1 == 10000);
  CHECK(report.diagnostics.n2 == 10000);
  CHECK(report.diagnostics.bandwidth_used == 0.05);
  CHECK(report.diagnostics.support_overlap_fraction == 1.0);
}

TEST_CASE("matches the standard estimator on data missing completely at "
          "random") {
  tsiv::DGPSpec spec = tsiv::setting_spec(1, 4);
  spec.n1 = 5000;
  spec.n2 = 5000;
  const auto ds = tsiv::sample_dgp(spec, 99).ds;
  const tsiv::BasisSpec basis = tsiv::scenario_basis(1);

  const auto tm = tsiv::fit_treatment_model(ds.aux);
  const auto cp = tsiv::fit_control_projection(ds.aux, tm);
  const auto standard = tsiv::estimate_alpha(ds.primary, cp, basis);
  const auto mar = tsiv::estimate_alpha_mar(ds, basis);
  CHECK(std::abs(standard.alpha_hat[0] - 1.0) < 0.3);
  CHECK(std::abs(mar.alpha_hat[0] - 1.0) < 0.3);

  tsiv::BootstrapConfig boot;
  boot.replicates = 150;
  boot.seed = 99;
  const auto se_std = tsiv::bootstrap_inference(ds, basis, boot).se[0];
  const auto se_mar = tsiv::bootstrap_inference_mar(ds, basis, boot).se[0];
  CHECK(std::abs(mar.alpha_hat[0] - standard.alpha_hat[0]) <=
        2.0 * std::max(se_std, se_mar));
}

TEST_CASE("missing-at-random bootstrap is thread invariant") {
  const auto ds = tsiv::discrete_exact_sample(50);
  tsiv::BootstrapConfig boot;
  boot.replicates = 48;
  boot.seed = 7;

  const auto one =
      tsiv::bootstrap_inference_mar(ds, tsiv::BasisSpec{}, boot, binary_cfg(), 1);
  const auto two =
      tsiv::bootstrap_inference_mar(ds, tsiv::BasisSpec{}, boot, binary_cfg(), 2);
  CHECK(reports_equal(one, two));
  CHECK(one.method == "bootstrap");
  CHECK(one.replicates_requested == 48);
  CHECK(one.replicates_failed == 0);
  CHECK(one.se[0] > 0.0);
  CHECK(one.ci_lower[0] <= one.ci_upper[0]);
}

TEST_CASE("missing-at-random bootstrap validates its configuration") {
  const auto ds = tsiv::discrete_exact_sample(10);
  tsiv::BootstrapConfig boot;
  boot.replicates = 0;
  CHECK_THROWS_AS((void)tsiv::bootstrap_inference_mar(ds, tsiv::BasisSpec{},
                                                      boot, binary_cfg()),
                  std::invalid_argument);
  boot.replicates = 10;
  boot.level = 1.0;
  CHECK_THROWS_AS((void)tsiv::bootstrap_inference_mar(ds, tsiv::BasisSpec{},
                                                      boot, binary_cfg()),
                  std::invalid_argument);
}
