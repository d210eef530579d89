#include "tsiv/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "tsiv/errors.hpp"
#include "tsiv/estimator.hpp"
#include "tsiv/parallel.hpp"
#include "tsiv/rng.hpp"

namespace tsiv {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

void check_spec(const DGPSpec& spec) {
  if (spec.scenario != 1 && spec.scenario != 2)
    throw std::invalid_argument("DGPSpec: scenario must be 1 or 2");
  if (spec.n1 < 1 || spec.n2 < 1)
    throw std::invalid_argument("DGPSpec: sample sizes must be positive");
  if (spec.u_dist == Dist::bernoulli_half)
    throw std::invalid_argument(
        "DGPSpec: confounder distribution must be continuous");
  if (!(spec.eta_sd >= 0.0) || !std::isfinite(spec.eta_sd))
    throw std::invalid_argument("DGPSpec: eta_sd must be finite and >= 0");
}

double draw_instrument(Dist d, Rng& rng) {
  switch (d) {
    case Dist::bernoulli_half:
      return rng.bernoulli(0.5) ? 1.0 : 0.0;
    case Dist::exponential1:
      return rng.exponential();
    case Dist::uniform_pm1:
      return rng.uniform(-1.0, 1.0);
    case Dist::normal01:
      return rng.normal();
  }
  return 0.0;
}

// Mean 0, variance 1 in every branch.
double draw_error(Dist d, Rng& rng) {
  switch (d) {
    case Dist::exponential1:
      return rng.exponential() - 1.0;
    case Dist::uniform_pm1:
      return rng.uniform(-1.0, 1.0) * kSqrt3;
    case Dist::normal01:
      return rng.normal();
    case Dist::bernoulli_half:
      break;
  }
  throw std::invalid_argument("draw_error: unsupported distribution");
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

const char* dist_name(Dist d) {
  switch (d) {
    case Dist::bernoulli_half:
      return "bernoulli";
    case Dist::exponential1:
      return "exponential";
    case Dist::uniform_pm1:
      return "uniform";
    case Dist::normal01:
      return "normal";
  }
  return "unknown";
}

Dist parse_dist(const std::string& name) {
  if (name == "bernoulli") return Dist::bernoulli_half;
  if (name == "exponential") return Dist::exponential1;
  if (name == "uniform") return Dist::uniform_pm1;
  if (name == "normal") return Dist::normal01;
  throw ConfigError("unknown distribution: " + name);
}

SelectionSpec parse_selection(const std::string& text) {
  SelectionSpec sel;
  if (text == "mcar") {
    sel.kind = SelectionSpec::Kind::mcar;
    return sel;
  }
  const std::string prefix = "logistic:";
  if (text.rfind(prefix, 0) == 0) {
    sel.kind = SelectionSpec::Kind::logistic;
    try {
      std::size_t used = 0;
      sel.coef = std::stod(text.substr(prefix.size()), &used);
      if (used != text.size() - prefix.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("invalid selection coefficient in: " + text);
    }
    if (!std::isfinite(sel.coef))
      throw ConfigError("invalid selection coefficient in: " + text);
    return sel;
  }
  throw ConfigError("unknown selection: " + text +
                    " (expected \"mcar\" or \"logistic:<coef>\")");
}

std::string selection_name(const SelectionSpec& sel) {
  if (sel.kind == SelectionSpec::Kind::mcar) return "mcar";
  return "logistic:" + std::to_string(sel.coef);
}

BasisSpec scenario_basis(int scenario) {
  if (scenario == 1) return BasisSpec{};
  if (scenario == 2)
    return BasisSpec{{BasisTerm{BasisTerm::Kind::power, 2}}};
  throw std::invalid_argument("scenario_basis: scenario must be 1 or 2");
}

double true_alpha(const DGPSpec& spec) { return spec.alpha; }

DrawnSample sample_dgp(const DGPSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  Rng rng(seed);

  const std::size_t n_total = spec.n1 + spec.n2;
  DrawnSample out;
  out.joint.reserve(n_total);
  out.ds.aux.reserve(spec.n1 + 16);
  out.ds.primary.reserve(spec.n2 + 16);

  const bool logistic_selection =
      spec.selection.kind == SelectionSpec::Kind::logistic;

  for (std::size_t i = 0; i < n_total; ++i) {
    const double z = draw_instrument(spec.z_dist, rng);
    const double u = draw_error(spec.u_dist, rng);
    const double eps = draw_error(spec.u_dist, rng);
    const double eta = spec.eta_sd * rng.normal();

    const double a = spec.gamma * z + spec.l * u + eps;
    const double ga = spec.scenario == 1 ? a : a * a;
    const double y = spec.alpha * ga + spec.beta * u + eta;

    out.joint.push_back(JointRow{z, a, y});

    bool in_primary;
    if (logistic_selection)
      in_primary = rng.bernoulli(logistic(spec.selection.coef * a));
    else
      in_primary = i >= spec.n1;

    if (in_primary)
      out.ds.primary.push_back(PrimaryRow{a, y});
    else
      out.ds.aux.push_back(AuxiliaryRow{z, a});
  }
  return out;
}

MonteCarloResult run_monte_carlo(const DGPSpec& spec, std::size_t reps,
                                 const BootstrapConfig& bootstrap,
                                 std::uint64_t master_seed, unsigned threads,
                                 bool with_ci) {
  if (reps < 1)
    throw std::invalid_argument("run_monte_carlo: reps must be >= 1");
  check_spec(spec);

  const BasisSpec basis = scenario_basis(spec.scenario);
  const double alpha0 = true_alpha(spec);

  std::vector<double> alpha_hat(reps, 0.0);
  std::vector<double> boot_se(reps, 0.0);
  std::vector<unsigned char> covered(reps, 0);
  std::vector<unsigned char> failed(reps, 0);

  const auto t0 = std::chrono::steady_clock::now();
  run_indexed_tasks(reps, threads, [&](std::size_t k) {
    const std::uint64_t seed_k = derive_seed(master_seed, k);
    const DrawnSample drawn = sample_dgp(spec, seed_k);
    try {
      const TreatmentModel tm = fit_treatment_model(drawn.ds.aux);
      const ControlProjection cp = fit_control_projection(drawn.ds.aux, tm);
      const EstimateReport est = estimate_alpha(drawn.ds.primary, cp, basis);
      alpha_hat[k] = est.alpha_hat[0];
      if (with_ci) {
        BootstrapConfig bcfg = bootstrap;
        bcfg.seed = derive_seed(seed_k, 1);
        const InferenceReport inf =
            bootstrap_inference(drawn.ds, basis, bcfg, {}, 1);
        boot_se[k] = inf.se[0];
        covered[k] =
            inf.ci_lower[0] <= alpha0 && alpha0 <= inf.ci_upper[0] ? 1 : 0;
      }
    } catch (const EstimationError&) {
      failed[k] = 1;
    }
  });
  const auto t1 = std::chrono::steady_clock::now();

  std::size_t n_ok = 0;
  double sum = 0.0, sum_sq_err = 0.0, sum_se = 0.0;
  std::size_t n_covered = 0;
  for (std::size_t k = 0; k < reps; ++k) {
    if (failed[k]) continue;
    ++n_ok;
    sum += alpha_hat[k];
    const double err = alpha_hat[k] - alpha0;
    sum_sq_err += err * err;
    sum_se += boot_se[k];
    n_covered += covered[k];
  }
  if (n_ok == 0) throw EstimationError("simulation degenerate");

  MonteCarloResult res;
  res.n_reps = reps;
  res.n_failed = reps - n_ok;
  const double mean = sum / static_cast<double>(n_ok);
  res.bias_x100 = 100.0 * (mean - alpha0);
  res.mse_x100 = 100.0 * sum_sq_err / static_cast<double>(n_ok);
  res.coverage_pct =
      with_ci ? 100.0 * static_cast<double>(n_covered) /
                    static_cast<double>(n_ok)
              : std::nan("");
  double ss = 0.0;
  for (std::size_t k = 0; k < reps; ++k) {
    if (failed[k]) continue;
    ss += (alpha_hat[k] - mean) * (alpha_hat[k] - mean);
  }
  res.mc_sd = n_ok > 1 ? std::sqrt(ss / static_cast<double>(n_ok - 1)) : 0.0;
  res.mean_bootstrap_se = with_ci ? sum_se / static_cast<double>(n_ok) : 0.0;
  res.wall_seconds =
      std::chrono::duration<double>(t1 - t0).count();
  return res;
}

namespace {

struct SettingRow {
  double l;
  Dist z;
  Dist u;
};

// Shared six-setting grid: confounder loading plus instrument and
// confounder laws.
constexpr SettingRow kSettings[6] = {
    {1.0, Dist::bernoulli_half, Dist::exponential1},
    {0.5, Dist::bernoulli_half, Dist::normal01},
    {1.0, Dist::exponential1, Dist::uniform_pm1},
    {0.5, Dist::exponential1, Dist::normal01},
    {1.0, Dist::uniform_pm1, Dist::exponential1},
    {0.5, Dist::uniform_pm1, Dist::normal01},
};

// Extended grid used by the wider result tables.
constexpr SettingRow kExtendedSettings[10] = {
    {1.0, Dist::bernoulli_half, Dist::exponential1},
    {1.0, Dist::bernoulli_half, Dist::uniform_pm1},
    {1.0, Dist::bernoulli_half, Dist::normal01},
    {0.5, Dist::bernoulli_half, Dist::normal01},
    {1.0, Dist::exponential1, Dist::uniform_pm1},
    {1.0, Dist::exponential1, Dist::normal01},
    {0.5, Dist::exponential1, Dist::normal01},
    {1.0, Dist::uniform_pm1, Dist::exponential1},
    {1.0, Dist::uniform_pm1, Dist::normal01},
    {0.5, Dist::uniform_pm1, Dist::normal01},
};

DGPSpec spec_from_row(int scenario, const SettingRow& row) {
  DGPSpec spec;
  spec.scenario = scenario;
  spec.l = row.l;
  spec.z_dist = row.z;
  spec.u_dist = row.u;
  return spec;
}

}  // namespace

DGPSpec setting_spec(int scenario, int setting) {
  if (scenario != 1 && scenario != 2)
    throw ConfigError("scenario must be 1 or 2");
  if (setting < 1 || setting > 6)
    throw ConfigError("setting must be between 1 and 6");
  return spec_from_row(scenario, kSettings[setting - 1]);
}

std::vector<CatalogEntry> builtin_catalog(const std::string& name) {
  std::vector<CatalogEntry> out;
  auto add = [&](int scenario, int setting, const SettingRow& row,
                 std::size_t n1, std::size_t n2) {
    CatalogEntry e;
    e.scenario = scenario;
    e.setting = setting;
    e.spec = spec_from_row(scenario, row);
    e.spec.n1 = n1;
    e.spec.n2 = n2;
    out.push_back(std::move(e));
  };

  if (name == "table1-scenario1" || name == "table1-scenario2") {
    const int scenario = name.back() == '1' ? 1 : 2;
    constexpr std::size_t sizes[2] = {5000, 10000};
    for (int s = 1; s <= 6; ++s)
      for (std::size_t n1 : sizes)
        for (std::size_t n2 : sizes)
          add(scenario, s, kSettings[s - 1], n1, n2);
    return out;
  }
  if (name == "appendix-scenario1") {
    constexpr std::size_t sizes[3] = {5000, 10000, 20000};
    for (int s = 1; s <= 10; ++s)
      for (std::size_t n1 : sizes)
        for (std::size_t n2 : sizes)
          add(1, s, kExtendedSettings[s - 1], n1, n2);
    return out;
  }
  if (name == "appendix-scenario2") {
    constexpr std::size_t pairs[3][2] = {
        {10000, 20000}, {20000, 10000}, {20000, 20000}};
    for (int s = 1; s <= 6; ++s)
      for (const auto& pr : pairs) add(2, s, kSettings[s - 1], pr[0], pr[1]);
    return out;
  }
  throw ConfigError("unknown catalog: " + name);
}

DiscreteOracle discrete_population_oracle() {
  DiscreteOracle o;
  o.support = {-1.0, 0.0, 1.0, 2.0};
  o.prob = {0.25, 0.25, 0.25, 0.25};
  o.c_values = {-1.0, -1.0, 1.0, 1.0};
  o.gamma0 = 0.0;
  o.gamma1 = 1.0;
  o.alpha = 1.0;
  o.xi = 1.0;
  o.rho = 1.0;
  o.gram = {{1.0, 0.5, 0.0}, {0.5, 1.5, 1.0}, {0.0, 1.0, 1.0}};
  return o;
}

namespace {

struct DiscreteCell {
  double z, a, y;
};

// (Z, U) cells in a fixed order; A = Z + U, Y = A + U.
constexpr DiscreteCell kDiscreteCells[4] = {
    {0.0, -1.0, -2.0},
    {0.0, 1.0, 2.0},
    {1.0, 0.0, -1.0},
    {1.0, 2.0, 3.0},
};

}  // namespace

TwoSampleDataset discrete_exact_sample(std::size_t copies) {
  TwoSampleDataset ds;
  ds.aux.reserve(4 * copies);
  ds.primary.reserve(4 * copies);
  for (const DiscreteCell& cell : kDiscreteCells)
    for (std::size_t i = 0; i < copies; ++i) {
      ds.aux.push_back(AuxiliaryRow{cell.z, cell.a});
      ds.primary.push_back(PrimaryRow{cell.a, cell.y});
    }
  return ds;
}

std::vector<JointRow> discrete_exact_joint(std::size_t copies) {
  std::vector<JointRow> rows;
  rows.reserve(4 * copies);
  for (const DiscreteCell& cell : kDiscreteCells)
    for (std::size_t i = 0; i < copies; ++i)
      rows.push_back(JointRow{cell.z, cell.a, cell.y});
  return rows;
}

}  // namespace tsiv
