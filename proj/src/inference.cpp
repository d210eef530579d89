#include "tsiv/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>

#include "tsiv/errors.hpp"
#include "tsiv/grouped.hpp"
#include "tsiv/nonparam.hpp"
#include "tsiv/parallel.hpp"
#include "tsiv/rng.hpp"

namespace tsiv {

namespace detail {

std::vector<double> assemble_moment_row(const std::vector<double>& g,
                                        double c) {
  const std::size_t p = g.size();
  std::vector<double> x;
  x.reserve(p * p + p + 1);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) x.push_back(g[i] * g[j]);
  for (std::size_t i = 0; i < p; ++i) x.push_back(g[i] * c);
  x.push_back(c * c);
  return x;
}

Eigen::MatrixXd mu_to_gram(const Eigen::VectorXd& mu, std::size_t p) {
  const auto pi = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd m(pi + 1, pi + 1);
  for (Eigen::Index i = 0; i < pi; ++i)
    for (Eigen::Index j = 0; j < pi; ++j)
      m(i, j) = 0.5 * (mu(i * pi + j) + mu(j * pi + i));
  for (Eigen::Index i = 0; i < pi; ++i) {
    m(i, pi) = mu(pi * pi + i);
    m(pi, i) = mu(pi * pi + i);
  }
  m(pi, pi) = mu(pi * pi + pi);
  return m;
}

Eigen::VectorXd gram_to_mu(const Eigen::MatrixXd& m) {
  const Eigen::Index pi = m.rows() - 1;
  Eigen::VectorXd mu(pi * pi + pi + 1);
  for (Eigen::Index i = 0; i < pi; ++i)
    for (Eigen::Index j = 0; j < pi; ++j) mu(i * pi + j) = m(i, j);
  for (Eigen::Index i = 0; i < pi; ++i) mu(pi * pi + i) = m(i, pi);
  mu(pi * pi + pi) = m(pi, pi);
  return mu;
}

namespace {

Eigen::VectorXd alpha_of_mu(const Eigen::VectorXd& mu,
                            const Eigen::VectorXd& mgy, double mcy,
                            std::size_t p) {
  const auto pi = static_cast<Eigen::Index>(p);
  const Eigen::MatrixXd gram = mu_to_gram(mu, p);
  const Eigen::MatrixXd d = gram.fullPivLu().inverse();
  if (!d.allFinite()) throw EstimationError("variance estimation failed");
  return d.topLeftCorner(pi, pi) * mgy + d.topRightCorner(pi, 1) * mcy;
}

}  // namespace

Eigen::MatrixXd alpha_mu_jacobian(const Eigen::VectorXd& mu,
                                  const Eigen::VectorXd& mgy, double mcy,
                                  std::size_t p, double step_scale) {
  const auto pi = static_cast<Eigen::Index>(p);
  Eigen::MatrixXd jac(pi, mu.size());
  Eigen::VectorXd probe = mu;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double step = std::max(step_scale, step_scale * std::abs(mu(j)));
    probe(j) = mu(j) + step;
    const Eigen::VectorXd hi = alpha_of_mu(probe, mgy, mcy, p);
    probe(j) = mu(j) - step;
    const Eigen::VectorXd lo = alpha_of_mu(probe, mgy, mcy, p);
    probe(j) = mu(j);
    jac.col(j) = (hi - lo) / (2.0 * step);
  }
  return jac;
}

double sample_quantile(std::vector<double> draws, double prob) {
  std::sort(draws.begin(), draws.end());
  return expanded_quantile_sorted(draws, {}, prob);
}

InferenceReport summarize_bootstrap_draws(
    const std::vector<std::vector<double>>& draws,
    const std::vector<unsigned char>& failed, std::size_t p,
    const BootstrapConfig& cfg) {
  const std::size_t b_total = draws.size();
  std::size_t n_failed = 0;
  for (unsigned char f : failed) n_failed += f;
  if (n_failed * 20 > b_total) throw EstimationError("bootstrap unstable");

  InferenceReport report;
  report.method = "bootstrap";
  report.level = cfg.level;
  report.replicates_requested = b_total;
  report.replicates_failed = n_failed;
  report.se.resize(p);
  report.ci_lower.resize(p);
  report.ci_upper.resize(p);
  report.quantiles.resize(p);

  std::vector<double> coord;
  coord.reserve(b_total);
  for (std::size_t k = 0; k < p; ++k) {
    coord.clear();
    for (std::size_t b = 0; b < b_total; ++b)
      if (!failed[b]) coord.push_back(draws[b][k]);
    if (coord.size() < 2) throw EstimationError("bootstrap unstable");

    double mean = 0.0;
    for (double v : coord) mean += v;
    mean /= static_cast<double>(coord.size());
    double ss = 0.0;
    for (double v : coord) ss += (v - mean) * (v - mean);
    report.se[k] = std::sqrt(ss / static_cast<double>(coord.size() - 1));

    std::sort(coord.begin(), coord.end());
    const double tail = (1.0 - cfg.level) / 2.0;
    report.ci_lower[k] = expanded_quantile_sorted(coord, {}, tail);
    report.ci_upper[k] = expanded_quantile_sorted(coord, {}, 1.0 - tail);
    for (std::size_t qi = 0; qi < kReportQuantiles.size(); ++qi)
      report.quantiles[k][qi] =
          expanded_quantile_sorted(coord, {}, kReportQuantiles[qi]);
  }
  return report;
}

}  // namespace detail

std::pair<std::vector<double>, std::vector<std::vector<double>>> moment_vector(
    const std::vector<double>& primary_a, const ControlProjection& cp,
    const BasisSpec& basis) {
  const std::size_t n = primary_a.size();
  const std::vector<double> chat = evaluate_control_projection(cp, primary_a);

  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  const std::size_t q = basis.size() * basis.size() + basis.size() + 1;
  std::vector<double> mu(q, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(
        detail::assemble_moment_row(eval_basis(primary_a[i], basis), chat[i]));
    for (std::size_t j = 0; j < q; ++j) mu[j] += rows.back()[j];
  }
  for (double& m : mu) m /= static_cast<double>(n);
  return {std::move(mu), std::move(rows)};
}

std::vector<std::vector<double>> asymptotic_variance(
    const std::vector<PrimaryRow>& primary, const ControlProjection& cp,
    const BasisSpec& basis) {
  const std::size_t p = basis.size();
  const auto pi = static_cast<Eigen::Index>(p);
  const std::size_t n = primary.size();
  const auto ni = static_cast<Eigen::Index>(n);
  if (n < p + 3)
    throw std::invalid_argument("asymptotic_variance: sample too small");

  std::vector<double> a(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = primary[i].a;
    y[i] = primary[i].y;
  }
  const std::vector<double> chat = evaluate_control_projection(cp, a);

  // The fitted regression carries an intercept, so the influence
  // expansion runs on moments of the centered variables; without
  // centering the terms would describe the no-intercept estimator.
  Eigen::MatrixXd gmat(ni, pi);
  Eigen::VectorXd cvec(ni), yvec(ni);
  for (std::size_t i = 0; i < n; ++i) {
    const auto gvals = eval_basis(a[i], basis);
    for (std::size_t k = 0; k < p; ++k)
      gmat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          gvals[k];
    cvec(static_cast<Eigen::Index>(i)) = chat[i];
    yvec(static_cast<Eigen::Index>(i)) = y[i];
  }
  const Eigen::RowVectorXd gmean = gmat.colwise().mean();
  gmat.rowwise() -= gmean;
  cvec.array() -= cvec.mean();
  yvec.array() -= yvec.mean();

  Eigen::MatrixXd h(ni, pi + 1);
  h.leftCols(pi) = gmat;
  h.col(pi) = cvec;
  const Eigen::MatrixXd gram = h.transpose() * h / static_cast<double>(n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (!lu.isInvertible())
    throw EstimationError("Assumption 1 violated in sample");
  const Eigen::MatrixXd d = lu.inverse();
  const Eigen::MatrixXd d11 = d.topLeftCorner(pi, pi);
  const Eigen::VectorXd d12 = d.topRightCorner(pi, 1);

  const Eigen::VectorXd mgy = gmat.transpose() * yvec / static_cast<double>(n);
  const double mcy = cvec.dot(yvec) / static_cast<double>(n);

  const Eigen::VectorXd mu = detail::gram_to_mu(gram);
  const Eigen::MatrixXd jac =
      detail::alpha_mu_jacobian(mu, mgy, mcy, p, 1e-5);

  // Influence of row i: cross-moment part + Jacobian applied to its
  // moment vector.
  Eigen::MatrixXd phi(ni, pi);
  for (Eigen::Index i = 0; i < ni; ++i) {
    const Eigen::VectorXd gi = gmat.row(i).transpose();
    Eigen::VectorXd xi(pi * pi + pi + 1);
    for (Eigen::Index r = 0; r < pi; ++r)
      for (Eigen::Index c = 0; c < pi; ++c) xi(r * pi + c) = gi(r) * gi(c);
    for (Eigen::Index r = 0; r < pi; ++r) xi(pi * pi + r) = gi(r) * cvec(i);
    xi(pi * pi + pi) = cvec(i) * cvec(i);
    phi.row(i) = (d11 * gi * yvec(i) + d12 * cvec(i) * yvec(i) + jac * xi)
                     .transpose();
  }
  const Eigen::RowVectorXd phi_mean = phi.colwise().mean();
  phi.rowwise() -= phi_mean;
  Eigen::MatrixXd v = phi.transpose() * phi / static_cast<double>(n - 1);
  v = 0.5 * (v + v.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(v);
  const double max_eig = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, max_eig))
    throw EstimationError("variance estimation failed");

  v /= static_cast<double>(n);
  std::vector<std::vector<double>> out(p, std::vector<double>(p));
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < p; ++c)
      out[r][c] = v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

std::pair<double, double> wald_interval(double estimate, double se,
                                        double level) {
  const boost::math::normal_distribution<> snd;
  const double z = boost::math::quantile(snd, 0.5 + level / 2.0);
  return {estimate - z * se, estimate + z * se};
}

InferenceReport bootstrap_inference(const TwoSampleDataset& ds,
                                    const BasisSpec& basis,
                                    const BootstrapConfig& cfg,
                                    const BandwidthSpec& bandwidth,
                                    unsigned threads) {
  if (cfg.replicates < 1)
    throw std::invalid_argument("bootstrap_inference: replicates must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0))
    throw std::invalid_argument("bootstrap_inference: level must be in (0,1)");

  const std::size_t p = basis.size();
  const std::size_t b_total = cfg.replicates;
  const auto aux = detail::group_aux(ds.aux);
  const auto prim = detail::group_primary(ds.primary);
  const std::size_t n1 = aux.n_rows;
  const std::size_t n2 = prim.n_rows;

  // Slot per replicate; written once by whichever worker runs it.
  std::vector<std::vector<double>> draws(b_total);
  std::vector<unsigned char> failed(b_total, 0);

  run_indexed_tasks(b_total, threads, [&](std::size_t b) {
    Rng rng(derive_seed(cfg.seed, b));

    std::vector<double> ca(aux.key.size(), 0.0);
    for (std::size_t i = 0; i < n1; ++i)
      ca[aux.row_group[rng.uniform_index(n1)]] += 1.0;
    std::vector<double> cp_counts(prim.key.size(), 0.0);
    for (std::size_t i = 0; i < n2; ++i)
      cp_counts[prim.row_group[rng.uniform_index(n2)]] += 1.0;

    std::vector<double> ra, rz, rc, pa, py, pc;
    for (std::size_t g = 0; g < ca.size(); ++g) {
      if (ca[g] > 0.0) {
        ra.push_back(aux.key[g]);
        rz.push_back(aux.companion[g]);
        rc.push_back(ca[g]);
      }
    }
    for (std::size_t g = 0; g < cp_counts.size(); ++g) {
      if (cp_counts[g] > 0.0) {
        pa.push_back(prim.key[g]);
        py.push_back(prim.companion[g]);
        pc.push_back(cp_counts[g]);
      }
    }

    try {
      const TreatmentModel tm = detail::treatment_from_grouped(ra, rz, rc);
      const ControlProjection proj = detail::projection_from_grouped(
          std::move(ra), std::move(rz), std::move(rc), tm, bandwidth);
      const auto fit =
          detail::fit_primary_grouped(proj, pa, py, pc, basis, false);
      draws[b] = fit.alpha;
    } catch (const EstimationError&) {
      failed[b] = 1;
    }
  });

  return detail::summarize_bootstrap_draws(draws, failed, p, cfg);
}

}  // namespace tsiv
