#include "tsiv/mar.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tsiv/errors.hpp"
#include "tsiv/grouped.hpp"
#include "tsiv/kernels.hpp"
#include "tsiv/nonparam.hpp"
#include "tsiv/parallel.hpp"
#include "tsiv/rng.hpp"

namespace tsiv {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kDensityFloor = 1e-12;

void check_config(const MarConfig& cfg) {
  if (cfg.a_grid_size < 16)
    throw ConfigError("MAR grid size must be at least 16");
  for (double h : {cfg.bandwidths.pooled_density, cfg.bandwidths.cond_a,
                   cfg.bandwidths.cond_z, cfg.bandwidths.projection,
                   cfg.bandwidths.outcome})
    if (!std::isfinite(h))
      throw ConfigError("MAR bandwidth overrides must be finite");
}

// Override if positive, Silverman on the (ascending, replicated)
// sample otherwise.
double resolve_h(double override_h, const std::vector<double>& x_sorted,
                 const std::vector<double>& counts) {
  if (override_h > 0.0) return override_h;
  return detail::silverman_weighted_sorted(x_sorted, counts);
}

// Sorts a grouped column (value, count) pairs ascending by value so
// quantile-based rules can run on it.
void sort_with_counts(const std::vector<double>& values,
                      const std::vector<double>& counts,
                      std::vector<double>& out_values,
                      std::vector<double>& out_counts) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  out_values.resize(values.size());
  out_counts.resize(values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out_values[i] = values[idx[i]];
    out_counts[i] = counts[idx[i]];
  }
}

[[noreturn]] void throw_out_of_range() {
  throw EstimationError("instrument value outside estimable range");
}

int binary_level(double z) {
  if (z == 0.0) return 0;
  if (z == 1.0) return 1;
  throw std::invalid_argument(
      "ConditionalMeanFit: binary instrument query must be 0 or 1");
}

}  // namespace

double ConditionalMeanFit::instrument_density(double z) const {
  if (binary_) return mass_[binary_level(z)];
  const std::vector<double> den =
      detail::kernel_sum_weighted(z_train_, den_coef_, z_bandwidth_, {z});
  return den[0] * kInvSqrt2Pi / z_bandwidth_;
}

std::vector<double> ConditionalMeanFit::evaluate(
    const std::vector<double>& z) const {
  std::vector<double> out(z.size());
  if (binary_) {
    for (std::size_t j = 0; j < z.size(); ++j) {
      const int level = binary_level(z[j]);
      if (mass_[level] < kDensityFloor) throw_out_of_range();
      out[j] = cond_mean_[level];
    }
    return out;
  }
  const std::vector<double> num =
      detail::kernel_sum_weighted(z_train_, num_coef_, z_bandwidth_, z);
  const std::vector<double> den =
      detail::kernel_sum_weighted(z_train_, den_coef_, z_bandwidth_, z);
  const double density_scale = kInvSqrt2Pi / z_bandwidth_;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (den[j] * density_scale < kDensityFloor) throw_out_of_range();
    out[j] = num[j] / den[j];
  }
  return out;
}

double ConditionalMeanFit::evaluate_one(double z) const {
  return evaluate(std::vector<double>{z})[0];
}

ConditionalMeanFit fit_e_a_given_z(const TwoSampleDataset& ds,
                                   const MarConfig& cfg) {
  check_config(cfg);
  if (ds.aux.size() < 2 || ds.primary.size() < 2)
    throw std::invalid_argument(
        "fit_e_a_given_z: need at least 2 rows in each sample");

  const detail::GroupedPairs aux = detail::group_aux(ds.aux);

  std::vector<double> all_a;
  all_a.reserve(ds.aux.size() + ds.primary.size());
  for (const AuxiliaryRow& r : ds.aux) all_a.push_back(r.a);
  for (const PrimaryRow& r : ds.primary) all_a.push_back(r.a);
  const detail::GroupedValues pool =
      detail::group_values(all_a);

  ConditionalMeanFit fit;
  {
    double total = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < pool.value.size(); ++i) {
      total += pool.counts[i];
      sum += pool.counts[i] * pool.value[i];
    }
    fit.pooled_mean_ = sum / total;
  }

  if (!(pool.value.back() > pool.value.front()))
    throw EstimationError("zero-spread sample");
  const double h_f =
      resolve_h(cfg.bandwidths.pooled_density, pool.value, pool.counts);

  // The quadrature grid reaches five density bandwidths past the data
  // so boundary kernel mass is integrated rather than cut off.
  const std::size_t grid_n = cfg.a_grid_size;
  const double lo = pool.value.front() - 5.0 * h_f;
  const double hi = pool.value.back() + 5.0 * h_f;
  const double step = (hi - lo) / static_cast<double>(grid_n - 1);
  std::vector<double> grid(grid_n);
  for (std::size_t g = 0; g < grid_n; ++g)
    grid[g] = lo + static_cast<double>(g) * step;
  auto delta = [&](std::size_t g) {
    return (g == 0 || g + 1 == grid_n) ? 0.5 * step : step;
  };

  const std::vector<double> fa =
      detail::kde_weighted(pool.value, pool.counts, h_f, grid);

  const double h_a = resolve_h(cfg.bandwidths.cond_a, aux.key, aux.counts);

  if (cfg.z_is_binary) {
    for (double z : aux.companion)
      if (z != 0.0 && z != 1.0)
        throw std::invalid_argument(
            "fit_e_a_given_z: binary instrument must take values 0 and 1");
    fit.binary_ = true;
    const std::vector<double> p1 =
        detail::nw_eval_weighted(aux.key, aux.companion, aux.counts, h_a, grid);
    double mass[2] = {0.0, 0.0};
    double first_moment[2] = {0.0, 0.0};
    for (std::size_t g = 0; g < grid_n; ++g) {
      const double w = delta(g) * fa[g];
      const double w1 = w * p1[g];
      const double w0 = w - w1;
      mass[0] += w0;
      mass[1] += w1;
      first_moment[0] += w0 * grid[g];
      first_moment[1] += w1 * grid[g];
    }
    for (int level = 0; level < 2; ++level) {
      fit.mass_[level] = mass[level];
      fit.cond_mean_[level] =
          mass[level] > 0.0 ? first_moment[level] / mass[level] : 0.0;
    }
    return fit;
  }

  // Continuous instrument: fold the treatment-direction sums into one
  // numerator/denominator coefficient per instrument row, leaving
  // queries a single kernel pass over the instrument values.
  const std::vector<double> sg =
      detail::kernel_sum_weighted(aux.key, aux.counts, h_a, grid);
  std::vector<double> v(grid_n);
  for (std::size_t g = 0; g < grid_n; ++g)
    v[g] = sg[g] > 0.0 ? delta(g) * fa[g] / sg[g] : 0.0;

  const std::size_t n_groups = aux.key.size();
  std::vector<double> p_row(n_groups), q_row(n_groups);
  kernels::kernel_sums(grid.data(), grid.data(), v.data(), grid_n, h_a,
                       aux.key.data(), n_groups, p_row.data(), q_row.data());

  fit.z_train_ = aux.companion;
  fit.num_coef_.resize(n_groups);
  fit.den_coef_.resize(n_groups);
  for (std::size_t i = 0; i < n_groups; ++i) {
    fit.num_coef_[i] = aux.counts[i] * p_row[i];
    fit.den_coef_[i] = aux.counts[i] * q_row[i];
  }

  std::vector<double> z_sorted, zc_sorted;
  sort_with_counts(aux.companion, aux.counts, z_sorted, zc_sorted);
  fit.z_bandwidth_ = resolve_h(cfg.bandwidths.cond_z, z_sorted, zc_sorted);
  return fit;
}

std::vector<double> estimate_e_a_given_z(const TwoSampleDataset& ds,
                                         const std::vector<double>& z_query,
                                         const MarConfig& cfg) {
  return fit_e_a_given_z(ds, cfg).evaluate(z_query);
}

EstimateReport estimate_alpha_mar(const TwoSampleDataset& ds,
                                  const BasisSpec& basis,
                                  const MarConfig& cfg) {
  check_config(cfg);
  const std::size_t p = basis.size();
  if (ds.aux.size() < 2)
    throw std::invalid_argument("estimate_alpha_mar: auxiliary sample too small");
  if (ds.primary.size() < p + 2)
    throw std::invalid_argument("estimate_alpha_mar: primary sample too small");

  const ConditionalMeanFit cond = fit_e_a_given_z(ds, cfg);

  const detail::GroupedPairs aux = detail::group_aux(ds.aux);
  const detail::GroupedPairs prim = detail::group_primary(ds.primary);

  // Conditional means per auxiliary row, evaluated once per distinct
  // instrument value.
  const std::size_t n_aux_groups = aux.key.size();
  std::vector<std::size_t> z_order(n_aux_groups);
  std::iota(z_order.begin(), z_order.end(), std::size_t{0});
  std::sort(z_order.begin(), z_order.end(), [&](std::size_t a, std::size_t b) {
    return aux.companion[a] < aux.companion[b];
  });
  std::vector<double> unique_z;
  std::vector<std::uint32_t> z_index(n_aux_groups);
  for (std::size_t r = 0; r < n_aux_groups; ++r) {
    const std::size_t g = z_order[r];
    if (unique_z.empty() || aux.companion[g] != unique_z.back())
      unique_z.push_back(aux.companion[g]);
    z_index[g] = static_cast<std::uint32_t>(unique_z.size() - 1);
  }
  const std::vector<double> cond_at_z = cond.evaluate(unique_z);
  std::vector<double> mtilde(n_aux_groups);
  for (std::size_t g = 0; g < n_aux_groups; ++g)
    mtilde[g] = cond_at_z[z_index[g]];

  std::vector<double> all_a;
  all_a.reserve(ds.aux.size() + ds.primary.size());
  for (const AuxiliaryRow& r : ds.aux) all_a.push_back(r.a);
  for (const PrimaryRow& r : ds.primary) all_a.push_back(r.a);
  const detail::GroupedValues pool =
      detail::group_values(all_a);

  const double h_proj =
      resolve_h(cfg.bandwidths.projection, aux.key, aux.counts);
  const std::vector<double> proj =
      detail::nw_eval_weighted(aux.key, mtilde, aux.counts, h_proj, pool.value);
  const double h_out = resolve_h(cfg.bandwidths.outcome, prim.key, prim.counts);
  const std::vector<double> ytilde =
      detail::nw_eval_weighted(prim.key, prim.companion, prim.counts, h_out,
                               pool.value);

  const std::size_t m = pool.value.size();
  const auto mi = static_cast<Eigen::Index>(m);
  const auto pi = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd design(mi, pi + 2);
  Eigen::VectorXd response(mi);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double scale = std::sqrt(pool.counts[i]);
    total += pool.counts[i];
    const auto row = static_cast<Eigen::Index>(i);
    design(row, 0) = scale;
    const std::vector<double> g = eval_basis(pool.value[i], basis);
    for (std::size_t k = 0; k < p; ++k)
      design(row, static_cast<Eigen::Index>(k) + 1) = scale * g[k];
    design(row, pi + 1) = scale * (pool.value[i] - proj[i]);
    response(row) = scale * ytilde[i];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < pi + 2)
    throw EstimationError("Assumption 1 violated in sample");
  const Eigen::VectorXd beta = qr.solve(response);

  EstimateReport report;
  report.intercept = beta(0);
  report.alpha_hat.resize(p);
  for (std::size_t k = 0; k < p; ++k)
    report.alpha_hat[k] = beta(static_cast<Eigen::Index>(k) + 1);
  report.xi_hat = beta(pi + 1);

  const Eigen::MatrixXd gram = design.transpose() * design / total;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
  const double sv_min = svd.singularValues()(svd.singularValues().size() - 1);
  report.diagnostics.gram_condition_number =
      sv_min > 0.0 ? svd.singularValues()(0) / sv_min
                   : std::numeric_limits<double>::infinity();
  report.diagnostics.bandwidth_used = h_proj;
  report.diagnostics.n1 = ds.aux.size();
  report.diagnostics.n2 = ds.primary.size();

  const double aux_lo = aux.key.front();
  const double aux_hi = aux.key.back();
  double overlap = 0.0, prim_total = 0.0;
  for (std::size_t i = 0; i < prim.key.size(); ++i) {
    prim_total += prim.counts[i];
    if (prim.key[i] >= aux_lo && prim.key[i] <= aux_hi)
      overlap += prim.counts[i];
  }
  report.diagnostics.support_overlap_fraction = overlap / prim_total;
  return report;
}

InferenceReport bootstrap_inference_mar(const TwoSampleDataset& ds,
                                        const BasisSpec& basis,
                                        const BootstrapConfig& cfg,
                                        const MarConfig& mar_cfg,
                                        unsigned threads) {
  if (cfg.replicates < 1)
    throw std::invalid_argument(
        "bootstrap_inference_mar: replicates must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0))
    throw std::invalid_argument(
        "bootstrap_inference_mar: level must be in (0,1)");

  const std::size_t p = basis.size();
  const detail::GroupedPairs aux = detail::group_aux(ds.aux);
  const detail::GroupedPairs prim = detail::group_primary(ds.primary);
  const std::size_t n1 = aux.n_rows;
  const std::size_t n2 = prim.n_rows;

  std::vector<std::vector<double>> draws(cfg.replicates);
  std::vector<unsigned char> failed(cfg.replicates, 0);

  run_indexed_tasks(cfg.replicates, threads, [&](std::size_t b) {
    Rng rng(derive_seed(cfg.seed, b));

    std::vector<double> aux_counts(aux.key.size(), 0.0);
    for (std::size_t i = 0; i < n1; ++i)
      aux_counts[aux.row_group[rng.uniform_index(n1)]] += 1.0;
    std::vector<double> prim_counts(prim.key.size(), 0.0);
    for (std::size_t i = 0; i < n2; ++i)
      prim_counts[prim.row_group[rng.uniform_index(n2)]] += 1.0;

    TwoSampleDataset resample;
    resample.aux.reserve(n1);
    resample.primary.reserve(n2);
    for (std::size_t g = 0; g < aux_counts.size(); ++g)
      for (double c = 0.0; c < aux_counts[g]; c += 1.0)
        resample.aux.push_back(AuxiliaryRow{aux.companion[g], aux.key[g]});
    for (std::size_t g = 0; g < prim_counts.size(); ++g)
      for (double c = 0.0; c < prim_counts[g]; c += 1.0)
        resample.primary.push_back(PrimaryRow{prim.key[g], prim.companion[g]});

    try {
      draws[b] = estimate_alpha_mar(resample, basis, mar_cfg).alpha_hat;
    } catch (const EstimationError&) {
      failed[b] = 1;
    }
  });

  return detail::summarize_bootstrap_draws(draws, failed, p, cfg);
}

}  // namespace tsiv
