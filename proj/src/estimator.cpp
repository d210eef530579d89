#include "tsiv/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "tsiv/errors.hpp"
#include "tsiv/grouped.hpp"

namespace tsiv {

namespace detail {

GroupedPairs group_pairs(const double* key, const double* companion,
                         std::size_t n) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t l, std::uint32_t r) {
    if (key[l] != key[r]) return key[l] < key[r];
    return companion[l] < companion[r];
  });

  GroupedPairs out;
  out.n_rows = n;
  out.row_group.resize(n);
  for (std::uint32_t idx : order) {
    if (out.key.empty() || out.key.back() != key[idx] ||
        out.companion.back() != companion[idx]) {
      out.key.push_back(key[idx]);
      out.companion.push_back(companion[idx]);
      out.counts.push_back(0.0);
    }
    out.counts.back() += 1.0;
    out.row_group[idx] = static_cast<std::uint32_t>(out.key.size() - 1);
  }
  return out;
}

GroupedPairs group_aux(const std::vector<AuxiliaryRow>& aux) {
  std::vector<double> a(aux.size()), z(aux.size());
  for (std::size_t i = 0; i < aux.size(); ++i) {
    a[i] = aux[i].a;
    z[i] = aux[i].z;
  }
  return group_pairs(a.data(), z.data(), aux.size());
}

GroupedPairs group_primary(const std::vector<PrimaryRow>& primary) {
  std::vector<double> a(primary.size()), y(primary.size());
  for (std::size_t i = 0; i < primary.size(); ++i) {
    a[i] = primary[i].a;
    y[i] = primary[i].y;
  }
  return group_pairs(a.data(), y.data(), primary.size());
}

GroupedValues group_values(const std::vector<double>& v) {
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  GroupedValues out;
  for (double x : sorted) {
    if (out.value.empty() || out.value.back() != x) {
      out.value.push_back(x);
      out.counts.push_back(0.0);
    }
    out.counts.back() += 1.0;
  }
  return out;
}

TreatmentModel treatment_from_grouped(const std::vector<double>& a,
                                      const std::vector<double>& z,
                                      const std::vector<double>& counts) {
  const auto [zmin, zmax] = std::minmax_element(z.begin(), z.end());
  if (*zmin == *zmax) throw EstimationError("degenerate instrument");

  const double total = weighted_sum(counts, a.size());
  double mean_z = 0.0, mean_a = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    const double c = counts.empty() ? 1.0 : counts[g];
    mean_z += c * z[g];
    mean_a += c * a[g];
  }
  mean_z /= total;
  mean_a /= total;

  double cov = 0.0, var = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    const double c = counts.empty() ? 1.0 : counts[g];
    const double dz = z[g] - mean_z;
    cov += c * dz * (a[g] - mean_a);
    var += c * dz * dz;
  }
  TreatmentModel tm;
  tm.gamma1 = cov / var;
  tm.gamma0 = mean_a - tm.gamma1 * mean_z;
  return tm;
}

ControlProjection projection_from_grouped(std::vector<double> a,
                                          std::vector<double> z,
                                          std::vector<double> counts,
                                          const TreatmentModel& tm,
                                          const BandwidthSpec& bandwidth) {
  ControlProjection cp;
  cp.treatment_model = tm;
  cp.support_lo = a.front();
  cp.support_hi = a.back();
  cp.ez_given_a.bandwidth = resolve_bandwidth(bandwidth, a, z, counts);
  cp.ez_given_a.x_train = std::move(a);
  cp.ez_given_a.y_train = std::move(z);
  cp.ez_given_a.counts = std::move(counts);
  return cp;
}

namespace {

// Deduplicated treatment values with a per-group index map, so the
// smoother runs once per distinct point.  Input is ascending.
void unique_eval_points(const std::vector<double>& a,
                        std::vector<double>& unique,
                        std::vector<std::uint32_t>& group_to_unique) {
  unique.clear();
  group_to_unique.resize(a.size());
  for (std::size_t g = 0; g < a.size(); ++g) {
    if (unique.empty() || unique.back() != a[g]) unique.push_back(a[g]);
    group_to_unique[g] = static_cast<std::uint32_t>(unique.size() - 1);
  }
}

}  // namespace

PrimaryFit fit_primary_grouped(const ControlProjection& cp,
                               const std::vector<double>& a,
                               const std::vector<double>& y,
                               const std::vector<double>& counts,
                               const BasisSpec& basis, bool want_cond) {
  const std::size_t p = basis.size();
  const std::size_t rows = a.size();

  std::vector<double> unique;
  std::vector<std::uint32_t> to_unique;
  unique_eval_points(a, unique, to_unique);
  const std::vector<double> ez = nw_eval_weighted(
      cp.ez_given_a.x_train, cp.ez_given_a.y_train, cp.ez_given_a.counts,
      cp.ez_given_a.bandwidth,
      [&] {
        std::vector<double> clamped = unique;
        for (double& x : clamped)
          x = std::clamp(x, cp.support_lo, cp.support_hi);
        return clamped;
      }());

  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows),
                         static_cast<Eigen::Index>(p) + 2);
  Eigen::VectorXd response(static_cast<Eigen::Index>(rows));
  for (std::size_t g = 0; g < rows; ++g) {
    const double chat = a[g] - cp.treatment_model.gamma0 -
                        cp.treatment_model.gamma1 * ez[to_unique[g]];
    const double scale = counts.empty() ? 1.0 : std::sqrt(counts[g]);
    const auto gvals = eval_basis(a[g], basis);
    const auto row = static_cast<Eigen::Index>(g);
    design(row, 0) = scale;
    for (std::size_t k = 0; k < p; ++k)
      design(row, static_cast<Eigen::Index>(k) + 1) = scale * gvals[k];
    design(row, static_cast<Eigen::Index>(p) + 1) = scale * chat;
    response(row) = scale * y[g];
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < static_cast<Eigen::Index>(p) + 2)
    throw EstimationError("Assumption 1 violated in sample");
  const Eigen::VectorXd beta = qr.solve(response);

  PrimaryFit fit;
  fit.intercept = beta(0);
  fit.alpha.resize(p);
  for (std::size_t k = 0; k < p; ++k)
    fit.alpha[k] = beta(static_cast<Eigen::Index>(k) + 1);
  fit.xi = beta(static_cast<Eigen::Index>(p) + 1);

  if (want_cond) {
    const double total = weighted_sum(counts, rows);
    const Eigen::MatrixXd gram = design.transpose() * design / total;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
    const auto& sv = svd.singularValues();
    const double smallest = sv(sv.size() - 1);
    fit.cond = smallest > 0.0 ? sv(0) / smallest
                              : std::numeric_limits<double>::infinity();
  }
  return fit;
}

}  // namespace detail

TreatmentModel fit_treatment_model(const std::vector<AuxiliaryRow>& aux) {
  if (aux.size() < 2)
    throw std::invalid_argument("fit_treatment_model: need at least 2 auxiliary rows");
  const auto grouped = detail::group_aux(aux);
  return detail::treatment_from_grouped(grouped.key, grouped.companion,
                                        grouped.counts);
}

ControlProjection fit_control_projection(const std::vector<AuxiliaryRow>& aux,
                                         const TreatmentModel& tm,
                                         const BandwidthSpec& bandwidth) {
  if (aux.size() < 2)
    throw std::invalid_argument("fit_control_projection: need at least 2 auxiliary rows");
  auto grouped = detail::group_aux(aux);
  return detail::projection_from_grouped(
      std::move(grouped.key), std::move(grouped.companion),
      std::move(grouped.counts), tm, bandwidth);
}

std::vector<double> evaluate_control_projection(const ControlProjection& cp,
                                                const std::vector<double>& a) {
  std::vector<double> clamped = a;
  for (double& x : clamped) x = std::clamp(x, cp.support_lo, cp.support_hi);
  const std::vector<double> ez = nw_regress(cp.ez_given_a, clamped);
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j)
    out[j] = a[j] - cp.treatment_model.gamma0 -
             cp.treatment_model.gamma1 * ez[j];
  return out;
}

EstimateReport estimate_alpha(const std::vector<PrimaryRow>& primary,
                              const ControlProjection& cp,
                              const BasisSpec& basis) {
  const auto grouped = detail::group_primary(primary);
  const auto fit = detail::fit_primary_grouped(
      cp, grouped.key, grouped.companion, grouped.counts, basis, true);

  EstimateReport report;
  report.alpha_hat = fit.alpha;
  report.xi_hat = fit.xi;
  report.intercept = fit.intercept;
  report.diagnostics.bandwidth_used = cp.ez_given_a.bandwidth;
  report.diagnostics.gram_condition_number = fit.cond;
  report.diagnostics.n1 = static_cast<std::size_t>(detail::weighted_sum(
      cp.ez_given_a.counts, cp.ez_given_a.x_train.size()));
  report.diagnostics.n2 = primary.size();
  double inside = 0.0;
  for (std::size_t g = 0; g < grouped.key.size(); ++g)
    if (grouped.key[g] >= cp.support_lo && grouped.key[g] <= cp.support_hi)
      inside += grouped.counts[g];
  report.diagnostics.support_overlap_fraction =
      primary.empty() ? 0.0 : inside / static_cast<double>(primary.size());
  return report;
}

double assumption1_diagnostic(const std::vector<PrimaryRow>& primary,
                              const ControlProjection& cp,
                              const BasisSpec& basis) {
  const std::size_t p = basis.size();
  const auto grouped = detail::group_primary(primary);

  std::vector<double> unique;
  std::vector<std::uint32_t> to_unique;
  detail::unique_eval_points(grouped.key, unique, to_unique);
  std::vector<double> clamped = unique;
  for (double& x : clamped) x = std::clamp(x, cp.support_lo, cp.support_hi);
  const std::vector<double> ez =
      detail::nw_eval_weighted(cp.ez_given_a.x_train, cp.ez_given_a.y_train,
                               cp.ez_given_a.counts, cp.ez_given_a.bandwidth,
                               clamped);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(p) + 2, static_cast<Eigen::Index>(p) + 2);
  Eigen::VectorXd h(static_cast<Eigen::Index>(p) + 2);
  for (std::size_t g = 0; g < grouped.key.size(); ++g) {
    const double chat = grouped.key[g] - cp.treatment_model.gamma0 -
                        cp.treatment_model.gamma1 * ez[to_unique[g]];
    h(0) = 1.0;
    const auto gvals = eval_basis(grouped.key[g], basis);
    for (std::size_t k = 0; k < p; ++k)
      h(static_cast<Eigen::Index>(k) + 1) = gvals[k];
    h(static_cast<Eigen::Index>(p) + 1) = chat;
    gram.noalias() += grouped.counts[g] * h * h.transpose();
  }
  gram /= static_cast<double>(primary.size());

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gram);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  // Relative cutoff: below machine precision of the dominant singular
  // value counts as exact singularity.
  if (!(smallest > sv(0) * 1e-15))
    return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}

FullDataEstimate full_data_cf_estimate(const std::vector<JointRow>& joint,
                                       const BasisSpec& basis) {
  const std::size_t p = basis.size();
  if (joint.size() < p + 3)
    throw std::invalid_argument("full_data_cf_estimate: need at least p + 3 rows");

  // Canonical order makes the estimate exactly row-order invariant.
  std::vector<JointRow> rows = joint;
  std::sort(rows.begin(), rows.end(), [](const JointRow& l, const JointRow& r) {
    if (l.z != r.z) return l.z < r.z;
    if (l.a != r.a) return l.a < r.a;
    return l.y < r.y;
  });

  const std::size_t n = rows.size();
  if (rows.front().z == rows.back().z)
    throw EstimationError("degenerate design");

  double mean_z = 0.0, mean_a = 0.0;
  for (const auto& r : rows) {
    mean_z += r.z;
    mean_a += r.a;
  }
  mean_z /= static_cast<double>(n);
  mean_a /= static_cast<double>(n);
  double cov = 0.0, var = 0.0;
  for (const auto& r : rows) {
    const double dz = r.z - mean_z;
    cov += dz * (r.a - mean_a);
    var += dz * dz;
  }
  const double gamma1 = cov / var;
  const double gamma0 = mean_a - gamma1 * mean_z;

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(p) + 2);
  Eigen::VectorXd response(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    design(row, 0) = 1.0;
    const auto gvals = eval_basis(rows[i].a, basis);
    for (std::size_t k = 0; k < p; ++k)
      design(row, static_cast<Eigen::Index>(k) + 1) = gvals[k];
    design(row, static_cast<Eigen::Index>(p) + 1) =
        rows[i].a - gamma0 - gamma1 * rows[i].z;
    response(row) = rows[i].y;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < static_cast<Eigen::Index>(p) + 2)
    throw EstimationError("degenerate design");
  const Eigen::VectorXd beta = qr.solve(response);

  FullDataEstimate est;
  est.intercept = beta(0);
  est.alpha.resize(p);
  for (std::size_t k = 0; k < p; ++k)
    est.alpha[k] = beta(static_cast<Eigen::Index>(k) + 1);
  est.rho = beta(static_cast<Eigen::Index>(p) + 1);
  return est;
}

}  // namespace tsiv
