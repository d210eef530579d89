// Acceptance gate: each numbered criterion prints one [PASS]/[FAIL]
// line with its measured values; the process exits 0 only if every
// requested criterion passes.  Invoke with criterion numbers (default
// all) and --bin <path> for the criteria that drive the CLI binary.
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tsiv/core.hpp"
#include "tsiv/errors.hpp"
#include "tsiv/estimator.hpp"
#include "tsiv/inference.hpp"
#include "tsiv/mar.hpp"
#include "tsiv/report.hpp"
#include "tsiv/rng.hpp"
#include "tsiv/sim.hpp"

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fd(double v) { return tsiv::format_double(v); }

unsigned worker_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

tsiv::DGPSpec sized_spec(int scenario, int setting, std::size_t n1,
                         std::size_t n2) {
  tsiv::DGPSpec spec = tsiv::setting_spec(scenario, setting);
  spec.n1 = n1;
  spec.n2 = n2;
  return spec;
}

tsiv::BootstrapConfig boot200() {
  tsiv::BootstrapConfig b;
  b.replicates = 200;
  return b;
}

double two_sample_alpha(const tsiv::TwoSampleDataset& ds,
                        const tsiv::BasisSpec& basis) {
  const tsiv::TreatmentModel tm = tsiv::fit_treatment_model(ds.aux);
  const tsiv::ControlProjection cp = tsiv::fit_control_projection(ds.aux, tm);
  return tsiv::estimate_alpha(ds.primary, cp, basis).alpha_hat[0];
}

// Shared 500-rep run feeding criteria 2, 4, and 8.
const tsiv::MonteCarloResult& s1s4_run() {
  static const tsiv::MonteCarloResult r = tsiv::run_monte_carlo(
      sized_spec(1, 4, 5000, 5000), 500, boot200(), 1002, worker_threads(),
      true);
  return r;
}

Outcome check_table_run(const tsiv::MonteCarloResult& r, double bias_tol_x100,
                        double mse_lo_x100, double mse_hi_x100) {
  Outcome o;
  o.pass = std::abs(r.bias_x100) <= bias_tol_x100 &&
           r.mse_x100 >= mse_lo_x100 && r.mse_x100 <= mse_hi_x100 &&
           r.coverage_pct >= 92.0 && r.coverage_pct <= 98.0;
  o.detail = "bias_x100=" + fd(r.bias_x100) + " mse_x100=" + fd(r.mse_x100) +
             " coverage=" + fd(r.coverage_pct) +
             " failed_reps=" + std::to_string(r.n_failed);
  return o;
}

Outcome criterion_1() {
  const tsiv::MonteCarloResult r = tsiv::run_monte_carlo(
      sized_spec(1, 1, 5000, 5000), 500, boot200(), 1001, worker_threads(),
      true);
  return check_table_run(r, 2.0, 0.9, 3.6);
}

Outcome criterion_2() { return check_table_run(s1s4_run(), 2.0, 0.09, 0.36); }

Outcome criterion_3() {
  const tsiv::MonteCarloResult r = tsiv::run_monte_carlo(
      sized_spec(2, 4, 5000, 5000), 500, boot200(), 1003, worker_threads(),
      true);
  return check_table_run(r, 0.5, 0.0, 0.01);
}

Outcome criterion_4() {
  const double m5 = s1s4_run().mse_x100;
  const tsiv::MonteCarloResult r10 = tsiv::run_monte_carlo(
      sized_spec(1, 4, 10000, 10000), 500, boot200(), 1002, worker_threads(),
      false);
  const tsiv::MonteCarloResult r20 = tsiv::run_monte_carlo(
      sized_spec(1, 4, 20000, 20000), 500, boot200(), 1002, worker_threads(),
      false);
  Outcome o;
  o.pass = r10.mse_x100 < m5 && r20.mse_x100 < r10.mse_x100;
  o.detail = "mse_x100 5000:" + fd(m5) + " 10000:" + fd(r10.mse_x100) +
             " 20000:" + fd(r20.mse_x100);
  return o;
}

Outcome criterion_5() {
  const tsiv::TwoSampleDataset ds = tsiv::discrete_exact_sample(1000);
  tsiv::BandwidthSpec bw;
  bw.kind = tsiv::BandwidthSpec::Kind::fixed;
  bw.value = 0.05;
  const tsiv::TreatmentModel tm = tsiv::fit_treatment_model(ds.aux);
  const tsiv::ControlProjection cp =
      tsiv::fit_control_projection(ds.aux, tm, bw);
  const tsiv::EstimateReport est =
      tsiv::estimate_alpha(ds.primary, cp, tsiv::BasisSpec{});
  const tsiv::FullDataEstimate full = tsiv::full_data_cf_estimate(
      tsiv::discrete_exact_joint(1000), tsiv::BasisSpec{});
  Outcome o;
  o.pass = std::abs(est.alpha_hat[0] - 1.0) <= 1e-6 &&
           std::abs(est.xi_hat - 1.0) <= 1e-6 &&
           std::abs(full.alpha[0] - 1.0) <= 1e-6 &&
           std::abs(full.rho - 1.0) <= 1e-6;
  o.detail = "alpha=" + fd(est.alpha_hat[0]) + " xi=" + fd(est.xi_hat) +
             " full_alpha=" + fd(full.alpha[0]) + " full_rho=" + fd(full.rho);
  return o;
}

double rms_estimator_gap(std::size_t n, std::uint64_t master) {
  const tsiv::DGPSpec spec = sized_spec(1, 4, n, n);
  const tsiv::BasisSpec basis = tsiv::scenario_basis(1);
  double ss = 0.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const tsiv::DrawnSample drawn =
        tsiv::sample_dgp(spec, tsiv::derive_seed(master, k));
    const double a_ts = two_sample_alpha(drawn.ds, basis);
    const double a_fd =
        tsiv::full_data_cf_estimate(drawn.joint, basis).alpha[0];
    ss += (a_ts - a_fd) * (a_ts - a_fd);
  }
  return std::sqrt(ss / 100.0);
}

Outcome criterion_6() {
  const double rms_small = rms_estimator_gap(5000, 1006);
  const double rms_large = rms_estimator_gap(20000, 1006);
  Outcome o;
  o.pass = rms_large <= 0.65 * rms_small;
  o.detail = "rms_gap 5000:" + fd(rms_small) + " 20000:" + fd(rms_large) +
             " ratio=" + fd(rms_large / rms_small);
  return o;
}

Outcome criterion_7() {
  const tsiv::DrawnSample drawn =
      tsiv::sample_dgp(sized_spec(1, 4, 5000, 5000), 1007);
  const tsiv::TwoSampleDataset& ds = drawn.ds;
  const tsiv::BasisSpec basis = tsiv::scenario_basis(1);

  const tsiv::TreatmentModel tm = tsiv::fit_treatment_model(ds.aux);
  const tsiv::ControlProjection cp = tsiv::fit_control_projection(ds.aux, tm);

  std::vector<tsiv::AuxiliaryRow> aux_affine = ds.aux;
  for (tsiv::AuxiliaryRow& r : aux_affine) r.z = 3.0 * r.z - 2.0;
  const tsiv::TreatmentModel tm2 = tsiv::fit_treatment_model(aux_affine);
  const tsiv::ControlProjection cp2 =
      tsiv::fit_control_projection(aux_affine, tm2);

  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = cp.support_lo +
              (cp.support_hi - cp.support_lo) * static_cast<double>(i) / 100.0;
  const std::vector<double> c1 = tsiv::evaluate_control_projection(cp, grid);
  const std::vector<double> c2 = tsiv::evaluate_control_projection(cp2, grid);
  double max_c_dev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    max_c_dev = std::max(max_c_dev, std::abs(c1[i] - c2[i]));

  const double alpha1 =
      tsiv::estimate_alpha(ds.primary, cp, basis).alpha_hat[0];
  std::vector<tsiv::PrimaryRow> scaled = ds.primary;
  for (tsiv::PrimaryRow& r : scaled) r.y = 2.0 * r.y + 5.0;
  const double alpha2 = tsiv::estimate_alpha(scaled, cp, basis).alpha_hat[0];
  const double scale_dev = std::abs(alpha2 - 2.0 * alpha1);

  Outcome o;
  o.pass = max_c_dev <= 1e-10 && scale_dev <= 1e-10;
  o.detail =
      "instrument_dev=" + fd(max_c_dev) + " outcome_dev=" + fd(scale_dev);
  return o;
}

Outcome criterion_8() {
  const tsiv::DrawnSample drawn =
      tsiv::sample_dgp(sized_spec(1, 4, 5000, 5000), 1008);
  const tsiv::BasisSpec basis = tsiv::scenario_basis(1);
  const tsiv::TreatmentModel tm = tsiv::fit_treatment_model(drawn.ds.aux);
  const tsiv::ControlProjection cp =
      tsiv::fit_control_projection(drawn.ds.aux, tm);
  const auto v = tsiv::asymptotic_variance(drawn.ds.primary, cp, basis);
  const double se_asym = std::sqrt(v[0][0]);

  tsiv::BootstrapConfig bcfg = boot200();
  bcfg.seed = 1008;
  const double se_boot =
      tsiv::bootstrap_inference(drawn.ds, basis, bcfg).se[0];
  const double ratio_one = se_asym / se_boot;

  const tsiv::MonteCarloResult& mc = s1s4_run();
  const double ratio_mc = mc.mean_bootstrap_se / mc.mc_sd;

  Outcome o;
  o.pass = ratio_one >= 0.8 && ratio_one <= 1.25 && ratio_mc >= 0.8 &&
           ratio_mc <= 1.25;
  o.detail = "asym_se/boot_se=" + fd(ratio_one) +
             " mean_boot_se/mc_sd=" + fd(ratio_mc);
  return o;
}

Outcome criterion_9() {
  const tsiv::BasisSpec basis = tsiv::scenario_basis(1);

  tsiv::DGPSpec selected = sized_spec(1, 4, 10000, 10000);
  selected.selection = tsiv::parse_selection("logistic:0.5");
  double sum = 0.0;
  std::size_t ok = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const tsiv::TwoSampleDataset ds =
        tsiv::sample_dgp(selected, tsiv::derive_seed(1009, k)).ds;
    try {
      sum += tsiv::estimate_alpha_mar(ds, basis).alpha_hat[0];
      ++ok;
    } catch (const tsiv::EstimationError&) {
    }
  }
  const double mean_mar = ok > 0 ? sum / static_cast<double>(ok) : 0.0;

  const tsiv::DGPSpec mcar = sized_spec(1, 4, 10000, 10000);
  std::size_t hits = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const std::uint64_t rep_seed = tsiv::derive_seed(1010, k);
    const tsiv::TwoSampleDataset ds = tsiv::sample_dgp(mcar, rep_seed).ds;
    try {
      const double a_std = two_sample_alpha(ds, basis);
      const double a_mar = tsiv::estimate_alpha_mar(ds, basis).alpha_hat[0];
      tsiv::BootstrapConfig bcfg = boot200();
      bcfg.seed = tsiv::derive_seed(rep_seed, 1);
      const double se = tsiv::bootstrap_inference(ds, basis, bcfg,
                                                  tsiv::BandwidthSpec{},
                                                  worker_threads())
                            .se[0];
      if (std::abs(a_mar - a_std) <= 2.0 * se) ++hits;
    } catch (const tsiv::EstimationError&) {
    }
  }

  Outcome o;
  o.pass = ok >= 95 && std::abs(mean_mar - 1.0) <= 0.05 && hits >= 95;
  o.detail = "mean_alpha=" + fd(mean_mar) + " fitted=" + std::to_string(ok) +
             "/100 mcar_agreement=" + std::to_string(hits) + "/100";
  return o;
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

Outcome criterion_10(const std::string& bin) {
  Outcome o;
  if (bin.empty()) {
    o.detail = "needs --bin <cli path>";
    return o;
  }
  std::string dir =
      (std::filesystem::temp_directory_path() / "tsiv-accept-XXXXXX").string();
  if (mkdtemp(dir.data()) == nullptr) {
    o.detail = "cannot create scratch directory";
    return o;
  }

  const tsiv::DrawnSample drawn =
      tsiv::sample_dgp(sized_spec(1, 1, 5000, 5000), 424);
  std::string aux = "z,a\n";
  for (const tsiv::AuxiliaryRow& r : drawn.ds.aux)
    aux += fd(r.z) + "," + fd(r.a) + "\n";
  std::string primary = "a,y\n";
  for (const tsiv::PrimaryRow& r : drawn.ds.primary)
    primary += fd(r.a) + "," + fd(r.y) + "\n";
  const std::string aux_path = dir + "/aux.csv";
  const std::string primary_path = dir + "/primary.csv";
  {
    std::ofstream(aux_path, std::ios::binary) << aux;
    std::ofstream(primary_path, std::ios::binary) << primary;
  }

  bool ok = true;
  std::string fail;
  const unsigned counts[3] = {1, 4, 8};

  std::string est_ref, sim_ref;
  for (unsigned t : counts) {
    const std::string est_out = dir + "/est-" + std::to_string(t) + ".json";
    const std::string est_cmd = "'" + bin + "' estimate --aux '" + aux_path +
                                "' --primary '" + primary_path +
                                "' --bootstrap 200 --seed 31 --threads " +
                                std::to_string(t) + " --out '" + est_out + "'";
    const std::string sim_out = dir + "/sim-" + std::to_string(t) + ".csv";
    const std::string sim_cmd =
        "'" + bin +
        "' simulate --scenario 1 --setting 4 --n1 2000 --n2 2000 --reps 3 "
        "--bootstrap 50 --seed 17 --threads " +
        std::to_string(t) + " --out '" + sim_out + "'";
    if (run_command(est_cmd) != 0 || run_command(sim_cmd) != 0) {
      ok = false;
      fail = "command failed at threads=" + std::to_string(t);
      break;
    }
    const std::string est_bytes = slurp(est_out);
    const std::string sim_bytes = slurp(sim_out);
    if (t == 1) {
      est_ref = est_bytes;
      sim_ref = sim_bytes;
    } else if (est_bytes != est_ref || sim_bytes != sim_ref) {
      ok = false;
      fail = "output differs at threads=" + std::to_string(t);
      break;
    }
  }

  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  o.pass = ok;
  o.detail = ok ? "estimate and simulate bytes identical at 1/4/8 threads"
              : fail;
  return o;
}

const char* criterion_name(int n) {
  switch (n) {
    case 1: return "linear model setting 1 bias/MSE/coverage at (5000,5000)";
    case 2: return "linear model setting 4 bias/MSE/coverage at (5000,5000)";
    case 3: return "quadratic model setting 4 bias/MSE/coverage at (5000,5000)";
    case 4: return "MSE decreases as both samples grow";
    case 5: return "exact recovery on the enumerated discrete sample";
    case 6: return "two-sample vs full-data gap shrinks with sample size";
    case 7: return "instrument-affine and outcome-scaling invariances";
    case 8: return "asymptotic, bootstrap, and Monte Carlo dispersion agree";
    case 9: return "treatment-dependent missingness estimator";
    case 10: return "byte-identical output across 1/4/8 worker threads";
    default: return "unknown";
  }
}

Outcome run_criterion(int n, const std::string& bin) {
  try {
    switch (n) {
      case 1: return criterion_1();
      case 2: return criterion_2();
      case 3: return criterion_3();
      case 4: return criterion_4();
      case 5: return criterion_5();
      case 6: return criterion_6();
      case 7: return criterion_7();
      case 8: return criterion_8();
      case 9: return criterion_9();
      case 10: return criterion_10(bin);
      default: return {false, "no such criterion"};
    }
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  std::string bin;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--bin") {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "--bin requires a path\n");
        return 2;
      }
      bin = argv[++i];
      continue;
    }
    char* end = nullptr;
    const long n = std::strtol(arg.c_str(), &end, 10);
    if (end == nullptr || *end != '\0' || n < 1 || n > 10) {
      std::fprintf(stderr, "unknown argument: %s\n", arg.c_str());
      return 2;
    }
    wanted.push_back(static_cast<int>(n));
  }
  if (wanted.empty())
    for (int n = 1; n <= 10; ++n) wanted.push_back(n);

  bool all_pass = true;
  for (int n : wanted) {
    const Outcome o = run_criterion(n, bin);
    std::printf("[%s] criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", n,
                criterion_name(n), o.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
