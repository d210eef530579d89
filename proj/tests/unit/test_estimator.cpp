#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "tsiv/errors.hpp"
#include "tsiv/estimator.hpp"
#include "tsiv/grouped.hpp"
#include "tsiv/rng.hpp"
#include "tsiv/sim.hpp"

namespace {

tsiv::BandwidthSpec fixed_bw(double h) {
  tsiv::BandwidthSpec spec;
  spec.kind = tsiv::BandwidthSpec::Kind::fixed;
  spec.value = h;
  return spec;
}

// Smooth synthetic data with a known linear response in (1, A, C).
tsiv::TwoSampleDataset make_linear_dataset(std::uint64_t seed, std::size_t n1,
                                           std::size_t n2) {
  tsiv::Rng rng(seed);
  tsiv::TwoSampleDataset ds;
  ds.aux.reserve(n1);
  ds.primary.reserve(n2);
  for (std::size_t i = 0; i < n1; ++i) {
    const double z = rng.normal();
    ds.aux.push_back({z, 0.5 + z + 0.8 * rng.normal()});
  }
  for (std::size_t j = 0; j < n2; ++j) {
    const double z = rng.normal();
    const double a = 0.5 + z + 0.8 * rng.normal();
    ds.primary.push_back({a, 1.0 + 2.0 * a + 0.3 * rng.normal()});
  }
  return ds;
}

// A first stage whose slope is exactly zero, which makes the fitted
// control term an exact affine function of the treatment.
std::vector<tsiv::AuxiliaryRow> zero_slope_aux() {
  return {{0.0, 1.0}, {1.0, 1.0}, {0.0, 2.0}, {1.0, 2.0}};
}

}  // namespace

TEST_CASE("grouping canonicalises paired rows") {
  const std::vector<double> key{2.0, 1.0, 2.0, 1.0};
  const std::vector<double> companion{5.0, 4.0, 5.0, 4.0};
  const auto g = tsiv::detail::group_pairs(key.data(), companion.data(), 4);
  CHECK(g.key == std::vector<double>{1.0, 2.0});
  CHECK(g.companion == std::vector<double>{4.0, 5.0});
  CHECK(g.counts == std::vector<double>{2.0, 2.0});
  CHECK(g.row_group == std::vector<std::uint32_t>{1, 0, 1, 0});
  CHECK(g.n_rows == 4);

  // Equal keys are ordered by companion.
  const std::vector<double> k2{1.0, 1.0, 1.0};
  const std::vector<double> c2{9.0, 3.0, 9.0};
  const auto g2 = tsiv::detail::group_pairs(k2.data(), c2.data(), 3);
  CHECK(g2.companion == std::vector<double>{3.0, 9.0});
  CHECK(g2.counts == std::vector<double>{1.0, 2.0});
}

TEST_CASE("grouping collapses repeated values") {
  const auto g = tsiv::detail::group_values({3.0, 1.0, 3.0, 2.0});
  CHECK(g.value == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(g.counts == std::vector<double>{1.0, 1.0, 2.0});
}

TEST_CASE("first-stage regression matches hand-computed coefficients") {
  const std::vector<tsiv::AuxiliaryRow> aux{{0.0, 1.0}, {1.0, 2.0}, {2.0, 4.0}};
  const auto tm = tsiv::fit_treatment_model(aux);
  CHECK(tm.gamma1 == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(tm.gamma0 == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("first stage is exact on the enumerated population") {
  const auto ds = tsiv::discrete_exact_sample(2);
  const auto tm = tsiv::fit_treatment_model(ds.aux);
  CHECK(tm.gamma1 == 1.0);
  CHECK(tm.gamma0 == 0.0);
}

TEST_CASE("first stage rejects degenerate inputs") {
  CHECK_THROWS_AS(tsiv::fit_treatment_model({{0.0, 1.0}}), std::invalid_argument);
  const std::vector<tsiv::AuxiliaryRow> flat{{0.5, 1.0}, {0.5, 2.0}, {0.5, 3.0}};
  CHECK_THROWS_WITH(tsiv::fit_treatment_model(flat), "degenerate instrument");
}

TEST_CASE("control projection reproduces the enumerated values") {
  const auto oracle = tsiv::discrete_population_oracle();
  const auto ds = tsiv::discrete_exact_sample(2);
  const auto tm = tsiv::fit_treatment_model(ds.aux);
  const auto cp = tsiv::fit_control_projection(ds.aux, tm, fixed_bw(0.01));
  const auto c = tsiv::evaluate_control_projection(cp, oracle.support);
  REQUIRE(c.size() == oracle.c_values.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == oracle.c_values[i]);
  CHECK(cp.support_lo == -1.0);
  CHECK(cp.support_hi == 2.0);
}

TEST_CASE("control projection is invariant to instrument shifts") {
  const auto ds = tsiv::discrete_exact_sample(2);
  auto shifted = ds;
  for (auto& row : shifted.aux) row.z += 2.0;
  const auto cp = tsiv::fit_control_projection(
      ds.aux, tsiv::fit_treatment_model(ds.aux), fixed_bw(0.01));
  const auto cp2 = tsiv::fit_control_projection(
      shifted.aux, tsiv::fit_treatment_model(shifted.aux), fixed_bw(0.01));
  const std::vector<double> grid{-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0};
  const auto c1 = tsiv::evaluate_control_projection(cp, grid);
  const auto c2 = tsiv::evaluate_control_projection(cp2, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(c1[i] == c2[i]);
}

TEST_CASE("control projection is invariant to affine instrument maps") {
  const auto ds = make_linear_dataset(31, 400, 50);
  auto mapped = ds;
  for (auto& row : mapped.aux) row.z = 3.0 * row.z - 2.0;
  const auto cp = tsiv::fit_control_projection(
      ds.aux, tsiv::fit_treatment_model(ds.aux), fixed_bw(0.3));
  const auto cp2 = tsiv::fit_control_projection(
      mapped.aux, tsiv::fit_treatment_model(mapped.aux), fixed_bw(0.3));
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i)
    grid.push_back(cp.support_lo +
                   (cp.support_hi - cp.support_lo) * i / 50.0);
  const auto c1 = tsiv::evaluate_control_projection(cp, grid);
  const auto c2 = tsiv::evaluate_control_projection(cp2, grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(std::abs(c1[i] - c2[i]) <= 1e-10);
}

TEST_CASE("projection outside the support clamps only the smoother input") {
  const auto ds = tsiv::discrete_exact_sample(1);
  const auto cp = tsiv::fit_control_projection(
      ds.aux, tsiv::fit_treatment_model(ds.aux), fixed_bw(0.01));
  // Beyond the support the smoothed term freezes at the edge while the
  // identity part keeps moving.
  const auto c = tsiv::evaluate_control_projection(cp, {2.0, 5.0, -1.0, -4.0});
  CHECK(c[1] - c[0] == 3.0);
  CHECK(c[2] - c[3] == 3.0);
}

TEST_CASE("estimator recovers the enumerated coefficients") {
  const auto oracle = tsiv::discrete_population_oracle();
  const auto ds = tsiv::discrete_exact_sample(2);
  const auto cp = tsiv::fit_control_projection(
      ds.aux, tsiv::fit_treatment_model(ds.aux), fixed_bw(0.01));
  const auto report = tsiv::estimate_alpha(ds.primary, cp, tsiv::BasisSpec{});
  REQUIRE(report.alpha_hat.size() == 1);
  CHECK(report.alpha_hat[0] == doctest::Approx(oracle.alpha).epsilon(1e-12));
  CHECK(report.xi_hat == doctest::Approx(oracle.xi).epsilon(1e-12));
  CHECK(std::abs(report.intercept) <= 1e-12);
  CHECK(report.diagnostics.n1 == 8);
  CHECK(report.diagnostics.n2 == 8);
  CHECK(report.diagnostics.bandwidth_used == 0.01);
  CHECK(report.diagnostics.support_overlap_fraction == 1.0);
  CHECK(report.diagnostics.gram_condition_number ==
        doctest::Approx(22.95643923738958).epsilon(1e-9));
}

TEST_CASE("estimate is exactly linear in the outcome scale") {
  const auto ds = make_linear_dataset(77, 300, 200);
  const auto cp = tsiv::fit_control_projection(
      ds.aux, tsiv::fit_treatment_model(ds.aux), {});
  auto doubled = ds.primary;
  for (auto& row : doubled) row.y *= 2.0;
  const auto r1 = tsiv::estimate_alpha(ds.primary, cp, tsiv::BasisSpec{});
  const auto r2 = tsiv::estimate_alpha(doubled, cp, tsiv::BasisSpec{});
  CHECK(r2.alpha_hat[0] == 2.0 * r1.alpha_hat[0]);
  CHECK(r2.xi_hat == 2.0 * r1.xi_hat);
  CHECK(r2.intercept == 2.0 * r1.intercept);
}

TEST_CASE("estimator reproduces an exactly conforming response") {
  const auto base = make_linear_dataset(55, 500, 300);
  const auto cp = tsiv::fit_control_projection(
      base.aux, tsiv::fit_treatment_model(base.aux), {});
  std::vector<double> a;
  for (const auto& row : base.primary) a.push_back(row.a);
  const auto c = tsiv::evaluate_control_projection(cp, a);
  std::vector<tsiv::PrimaryRow> primary(a.size());
  for (std::size_t j = 0; j < a.size(); ++j)
    primary[j] = {a[j], 2.0 + 3.0 * a[j] + 0.5 * c[j]};
  const auto report = tsiv::estimate_alpha(primary, cp, tsiv::BasisSpec{});
  CHECK(report.alpha_hat[0] == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(report.xi_hat == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(report.intercept == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("a collinear control term is reported") {
  const auto aux = zero_slope_aux();
  const auto tm = tsiv::fit_treatment_model(aux);
  CHECK(tm.gamma1 == 0.0);
  const auto cp = tsiv::fit_control_projection(aux, tm, {});
  const std::vector<tsiv::PrimaryRow> primary{
      {1.0, 2.0}, {1.5, 2.5}, {2.0, 4.0}, {2.5, 4.5}};
  CHECK_THROWS_WITH(tsiv::estimate_alpha(primary, cp, tsiv::BasisSpec{}),
                    "Assumption 1 violated in sample");
  CHECK(std::isinf(tsiv::assumption1_diagnostic(primary, cp, tsiv::BasisSpec{})));
}

TEST_CASE("condition diagnostic matches the enumerated matrix") {
  const auto ds = tsiv::discrete_exact_sample(2);
  const auto cp = tsiv::fit_control_projection(
      ds.aux, tsiv::fit_treatment_model(ds.aux), fixed_bw(0.01));
  const double cond =
      tsiv::assumption1_diagnostic(ds.primary, cp, tsiv::BasisSpec{});
  CHECK(cond == doctest::Approx(22.95643923738958).epsilon(1e-9));
}

TEST_CASE("estimates are invariant to row order") {
  const auto ds = make_linear_dataset(99, 250, 180);
  auto shuffled = ds;
  std::reverse(shuffled.aux.begin(), shuffled.aux.end());
  std::reverse(shuffled.primary.begin(), shuffled.primary.end());
  std::rotate(shuffled.aux.begin(), shuffled.aux.begin() + 37,
              shuffled.aux.end());
  std::rotate(shuffled.primary.begin(), shuffled.primary.begin() + 59,
              shuffled.primary.end());

  const auto fit = [](const tsiv::TwoSampleDataset& d) {
    const auto cp = tsiv::fit_control_projection(
        d.aux, tsiv::fit_treatment_model(d.aux), {});
    return tsiv::estimate_alpha(d.primary, cp, tsiv::BasisSpec{});
  };
  const auto r1 = fit(ds);
  const auto r2 = fit(shuffled);
  CHECK(r1.alpha_hat[0] == r2.alpha_hat[0]);
  CHECK(r1.xi_hat == r2.xi_hat);
  CHECK(r1.intercept == r2.intercept);
  CHECK(r1.diagnostics.bandwidth_used == r2.diagnostics.bandwidth_used);
}

TEST_CASE("full-data estimator is exact on the enumerated population") {
  const auto oracle = tsiv::discrete_population_oracle();
  const auto joint = tsiv::discrete_exact_joint(2);
  const auto est = tsiv::full_data_cf_estimate(joint, tsiv::BasisSpec{});
  REQUIRE(est.alpha.size() == 1);
  CHECK(est.alpha[0] == doctest::Approx(oracle.alpha).epsilon(1e-12));
  CHECK(est.rho == doctest::Approx(oracle.rho).epsilon(1e-12));
  CHECK(std::abs(est.intercept) <= 1e-12);
}

TEST_CASE("full-data estimator is invariant to row order") {
  auto joint = tsiv::discrete_exact_joint(3);
  auto shuffled = joint;
  std::reverse(shuffled.begin(), shuffled.end());
  std::rotate(shuffled.begin(), shuffled.begin() + 5, shuffled.end());
  const auto r1 = tsiv::full_data_cf_estimate(joint, tsiv::BasisSpec{});
  const auto r2 = tsiv::full_data_cf_estimate(shuffled, tsiv::BasisSpec{});
  CHECK(r1.alpha[0] == r2.alpha[0]);
  CHECK(r1.rho == r2.rho);
  CHECK(r1.intercept == r2.intercept);
}

TEST_CASE("full-data estimator rejects degenerate designs") {
  std::vector<tsiv::JointRow> joint{
      {0.5, 1.0, 2.0}, {0.5, 2.0, 3.0}, {0.5, 3.0, 4.0}, {0.5, 4.0, 5.0}};
  CHECK_THROWS_WITH(tsiv::full_data_cf_estimate(joint, tsiv::BasisSpec{}),
                    "degenerate design");
  CHECK_THROWS_AS(
      tsiv::full_data_cf_estimate({{0.0, 1.0, 2.0}}, tsiv::BasisSpec{}),
      std::invalid_argument);
}
