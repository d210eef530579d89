#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsiv/core.hpp"
#include "tsiv/inference.hpp"

namespace tsiv {

// Closed catalog of marginal distributions used by the simulation
// settings.  Draws for the confounder and the treatment error are
// standardised to mean 0, variance 1; instrument draws are used raw.
enum class Dist { bernoulli_half, exponential1, uniform_pm1, normal01 };

const char* dist_name(Dist d);
Dist parse_dist(const std::string& name);  // throws ConfigError

struct SelectionSpec {
  enum class Kind { mcar, logistic };
  Kind kind = Kind::mcar;
  // Slope in P(outcome observed | A = a) = logistic(coef * a).
  double coef = 0.5;
};

SelectionSpec parse_selection(const std::string& text);  // throws ConfigError
std::string selection_name(const SelectionSpec& sel);

struct DGPSpec {
  int scenario = 1;  // 1: Y = alpha*A + beta*U + eta; 2: alpha*A^2 instead
  double alpha = 1.0;
  double gamma = 1.0;
  double beta = 1.0;
  double l = 1.0;
  double eta_sd = 1.0;
  Dist z_dist = Dist::bernoulli_half;
  Dist u_dist = Dist::normal01;
  std::size_t n1 = 5000;
  std::size_t n2 = 5000;
  SelectionSpec selection;
};

// Basis the scenario's outcome equation is linear in: identity for
// scenario 1, squared treatment for scenario 2.
BasisSpec scenario_basis(int scenario);
double true_alpha(const DGPSpec& spec);

struct DrawnSample {
  TwoSampleDataset ds;
  // Every generated row regardless of which stratum it landed in, so
  // a full-data fit can run on identical randomness.
  std::vector<JointRow> joint;
};

// Draws n1 + n2 iid (Z, U, eps, eta) tuples and splits them into the
// two samples: by position under MCAR, by a logistic draw on A
// otherwise (realised sizes then vary around n1/n2).
DrawnSample sample_dgp(const DGPSpec& spec, std::uint64_t seed);

struct MonteCarloResult {
  std::size_t n_reps = 0;
  std::size_t n_failed = 0;
  double bias_x100 = 0.0;
  double mse_x100 = 0.0;
  double coverage_pct = 0.0;
  // Dispersion diagnostics: SD of the point estimates across reps and
  // the mean bootstrap SE, comparable when the intervals are honest.
  double mc_sd = 0.0;
  double mean_bootstrap_se = 0.0;
  double wall_seconds = 0.0;
};

// Runs `reps` independent draw-estimate-infer cycles with per-rep
// seeds derived from master_seed, so results are identical at any
// thread count.  Reps whose fit degenerates are counted and excluded
// from the moments; all of them failing raises
// EstimationError("simulation degenerate").  with_ci=false skips the
// bootstrap (coverage_pct is NaN then).
MonteCarloResult run_monte_carlo(const DGPSpec& spec, std::size_t reps,
                                 const BootstrapConfig& bootstrap,
                                 std::uint64_t master_seed,
                                 unsigned threads = 1, bool with_ci = true);

// Numbered simulation settings (shared by both scenarios): per-setting
// instrument/confounder laws and confounder loading, sizes left at
// their defaults.
DGPSpec setting_spec(int scenario, int setting);  // throws ConfigError

struct CatalogEntry {
  int scenario = 1;
  int setting = 1;  // number shown in the output row
  DGPSpec spec;     // fully resolved, sizes included
};

// Built-in result-table catalogs: "table1-scenario1" /
// "table1-scenario2" (6 settings x 4 size pairs) and
// "appendix-scenario1" (10 settings x 9 size pairs) /
// "appendix-scenario2" (6 settings x 3 extra size pairs).
std::vector<CatalogEntry> builtin_catalog(const std::string& name);

// Exact fixtures for the four-point discrete population
// (Z in {0,1}, U in {-1,1} equiprobable independent, eps = 0,
// A = Z + U, Y = A + U), where every population quantity is available
// by enumeration.
struct DiscreteOracle {
  std::vector<double> support;   // treatment support, ascending
  std::vector<double> prob;      // point masses
  std::vector<double> c_values;  // control projection at each point
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double alpha = 0.0;
  double xi = 0.0;
  double rho = 0.0;
  // Second-moment matrix of (1, A, C(A)).
  std::vector<std::vector<double>> gram;
};

DiscreteOracle discrete_population_oracle();

// Samples realising the oracle's cell frequencies exactly: `copies`
// rows per population cell on each side (auxiliary and primary).
TwoSampleDataset discrete_exact_sample(std::size_t copies);
std::vector<JointRow> discrete_exact_joint(std::size_t copies);

}  // namespace tsiv
