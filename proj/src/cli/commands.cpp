#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsiv/csv.hpp"
#include "tsiv/errors.hpp"
#include "tsiv/estimator.hpp"
#include "tsiv/inference.hpp"
#include "tsiv/mar.hpp"
#include "tsiv/nonparam.hpp"
#include "tsiv/report.hpp"
#include "tsiv/sim.hpp"

namespace tsiv::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Options {
  std::vector<std::string> basis{"identity"};
  BandwidthSpec bw_spec;
  std::string bw_echo = "auto";
  std::string inference = "bootstrap";  // bootstrap | asymptotic | both | none
  std::size_t bootstrap_replicates = 500;
  double bootstrap_level = 0.95;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  bool mar = false;
  MarConfig mar_cfg;

  std::string catalog;
  int scenario = 1;
  int setting = 1;
  std::size_t n1 = 5000;
  std::size_t n2 = 5000;
  std::size_t reps = 500;
  std::string selection = "mcar";
  bool with_ci = true;
  bool timing = false;
  std::optional<double> dgp_alpha, dgp_gamma, dgp_beta, dgp_l, dgp_eta_sd;
  std::optional<std::string> dgp_z_dist, dgp_u_dist;

  std::string aux_path, primary_path, joint_path, out_path;
  std::string format;  // resolved per command when empty
  bool full_data_baseline = false;
};

[[noreturn]] void bad_key(const std::string& path) {
  throw ConfigError("unknown config key: " + path);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number())
    throw ConfigError("config key \"" + path + "\" must be a number");
  return v.get<double>();
}

std::uint64_t as_uint(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config key \"" + path +
                    "\" must be a non-negative integer");
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean())
    throw ConfigError("config key \"" + path + "\" must be a boolean");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string())
    throw ConfigError("config key \"" + path + "\" must be a string");
  return v.get<std::string>();
}

void set_bandwidth(Options& opt, const std::string& text) {
  if (text == "auto") {
    opt.bw_spec = BandwidthSpec{};
    opt.bw_echo = "auto";
    return;
  }
  if (text == "silverman") {
    opt.bw_spec.kind = BandwidthSpec::Kind::silverman;
    opt.bw_echo = "silverman";
    return;
  }
  if (text == "loocv") {
    opt.bw_spec.kind = BandwidthSpec::Kind::loocv;
    opt.bw_echo = "loocv";
    return;
  }
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !(value > 0.0) ||
      !std::isfinite(value))
    throw ConfigError("invalid bandwidth: \"" + text +
                      "\" (expected \"auto\", \"loocv\", or a positive number)");
  opt.bw_spec.kind = BandwidthSpec::Kind::fixed;
  opt.bw_spec.value = value;
  opt.bw_echo = format_double(value);
}

void set_format(Options& opt, const std::string& text) {
  if (text != "json" && text != "csv")
    throw ConfigError("invalid format: \"" + text +
                      "\" (expected \"json\" or \"csv\")");
  opt.format = text;
}

void set_inference(Options& opt, const std::string& text) {
  if (text != "bootstrap" && text != "asymptotic" && text != "both" &&
      text != "none")
    throw ConfigError(
        "invalid inference: \"" + text +
        "\" (expected \"bootstrap\", \"asymptotic\", \"both\", or \"none\")");
  opt.inference = text;
}

void load_mar_block(const json& obj, Options& opt) {
  for (const auto& [key, value] : obj.items()) {
    const std::string path = "mar." + key;
    if (key == "enabled") {
      opt.mar = as_bool(value, path);
    } else if (key == "a_grid_size") {
      opt.mar_cfg.a_grid_size = as_uint(value, path);
    } else if (key == "z_is_binary") {
      opt.mar_cfg.z_is_binary = as_bool(value, path);
    } else if (key == "bandwidths") {
      if (!value.is_object())
        throw ConfigError("config key \"mar.bandwidths\" must be an object");
      for (const auto& [bk, bv] : value.items()) {
        const std::string bpath = "mar.bandwidths." + bk;
        if (bk == "pooled_density")
          opt.mar_cfg.bandwidths.pooled_density = as_number(bv, bpath);
        else if (bk == "cond_a")
          opt.mar_cfg.bandwidths.cond_a = as_number(bv, bpath);
        else if (bk == "cond_z")
          opt.mar_cfg.bandwidths.cond_z = as_number(bv, bpath);
        else if (bk == "projection")
          opt.mar_cfg.bandwidths.projection = as_number(bv, bpath);
        else if (bk == "outcome")
          opt.mar_cfg.bandwidths.outcome = as_number(bv, bpath);
        else
          bad_key(bpath);
      }
    } else {
      bad_key(path);
    }
  }
}

void load_simulate_block(const json& obj, Options& opt) {
  for (const auto& [key, value] : obj.items()) {
    const std::string path = "simulate." + key;
    if (key == "catalog") {
      opt.catalog = as_string(value, path);
    } else if (key == "scenario") {
      opt.scenario = static_cast<int>(as_uint(value, path));
    } else if (key == "setting") {
      opt.setting = static_cast<int>(as_uint(value, path));
    } else if (key == "n1") {
      opt.n1 = as_uint(value, path);
    } else if (key == "n2") {
      opt.n2 = as_uint(value, path);
    } else if (key == "reps") {
      opt.reps = as_uint(value, path);
    } else if (key == "master_seed") {
      opt.seed = as_uint(value, path);
    } else if (key == "selection") {
      opt.selection = as_string(value, path);
    } else if (key == "with_ci") {
      opt.with_ci = as_bool(value, path);
    } else if (key == "timing") {
      opt.timing = as_bool(value, path);
    } else if (key == "alpha") {
      opt.dgp_alpha = as_number(value, path);
    } else if (key == "gamma") {
      opt.dgp_gamma = as_number(value, path);
    } else if (key == "beta") {
      opt.dgp_beta = as_number(value, path);
    } else if (key == "l") {
      opt.dgp_l = as_number(value, path);
    } else if (key == "eta_sd") {
      opt.dgp_eta_sd = as_number(value, path);
    } else if (key == "z_dist") {
      opt.dgp_z_dist = as_string(value, path);
    } else if (key == "u_dist") {
      opt.dgp_u_dist = as_string(value, path);
    } else {
      bad_key(path);
    }
  }
}

void load_io_block(const json& obj, Options& opt) {
  for (const auto& [key, value] : obj.items()) {
    const std::string path = "io." + key;
    if (key == "aux")
      opt.aux_path = as_string(value, path);
    else if (key == "primary")
      opt.primary_path = as_string(value, path);
    else if (key == "joint")
      opt.joint_path = as_string(value, path);
    else if (key == "out")
      opt.out_path = as_string(value, path);
    else if (key == "format")
      set_format(opt, as_string(value, path));
    else
      bad_key(path);
  }
}

void load_config_file(const std::string& path, Options& opt) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + std::string(e.what()));
  }
  if (!doc.is_object())
    throw ConfigError(path + ": config root must be an object");

  for (const auto& [key, value] : doc.items()) {
    if (key == "basis") {
      if (!value.is_array())
        throw ConfigError("config key \"basis\" must be an array of strings");
      opt.basis.clear();
      for (const auto& item : value)
        opt.basis.push_back(as_string(item, "basis[]"));
    } else if (key == "bandwidth") {
      if (value.is_number())
        set_bandwidth(opt, format_double(value.get<double>()));
      else
        set_bandwidth(opt, as_string(value, "bandwidth"));
    } else if (key == "inference") {
      set_inference(opt, as_string(value, "inference"));
    } else if (key == "bootstrap") {
      if (!value.is_object())
        throw ConfigError("config key \"bootstrap\" must be an object");
      for (const auto& [bk, bv] : value.items()) {
        const std::string bpath = "bootstrap." + bk;
        if (bk == "replicates")
          opt.bootstrap_replicates = as_uint(bv, bpath);
        else if (bk == "level")
          opt.bootstrap_level = as_number(bv, bpath);
        else if (bk == "seed")
          opt.seed = as_uint(bv, bpath);
        else
          bad_key(bpath);
      }
    } else if (key == "seed") {
      opt.seed = as_uint(value, "seed");
    } else if (key == "threads") {
      opt.threads = static_cast<unsigned>(as_uint(value, "threads"));
    } else if (key == "mar") {
      if (!value.is_object())
        throw ConfigError("config key \"mar\" must be an object");
      load_mar_block(value, opt);
    } else if (key == "simulate") {
      if (!value.is_object())
        throw ConfigError("config key \"simulate\" must be an object");
      load_simulate_block(value, opt);
    } else if (key == "io") {
      if (!value.is_object())
        throw ConfigError("config key \"io\" must be an object");
      load_io_block(value, opt);
    } else {
      bad_key(key);
    }
  }
}

void check_common(const Options& opt) {
  if (opt.bootstrap_replicates < 1)
    throw ConfigError("bootstrap.replicates must be >= 1");
  if (!(opt.bootstrap_level > 0.0 && opt.bootstrap_level < 1.0))
    throw ConfigError("bootstrap.level must be in (0, 1)");
  if (opt.threads < 1) throw ConfigError("threads must be >= 1");
}

ordered_json finite_or_inf(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

ordered_json diagnostics_json(const DiagnosticsBlock& d) {
  ordered_json out;
  out["bandwidth_used"] = d.bandwidth_used;
  out["gram_condition_number"] = finite_or_inf(d.gram_condition_number);
  out["support_overlap_fraction"] = d.support_overlap_fraction;
  out["n1"] = d.n1;
  out["n2"] = d.n2;
  return out;
}

ordered_json config_echo(const Options& opt, const std::string& command) {
  ordered_json cfg;
  if (command == "estimate" || command == "diagnose") {
    cfg["basis"] = opt.basis;
    cfg["bandwidth"] = opt.bw_echo;
    ordered_json io;
    io["aux"] = opt.aux_path;
    io["primary"] = opt.primary_path;
    if (!opt.joint_path.empty()) io["joint"] = opt.joint_path;
    cfg["io"] = io;
  }
  if (command == "estimate") {
    cfg["inference"] = opt.inference;
    if (opt.inference == "bootstrap" || opt.inference == "both") {
      ordered_json boot;
      boot["replicates"] = opt.bootstrap_replicates;
      boot["level"] = opt.bootstrap_level;
      boot["seed"] = opt.seed;
      boot["ci_type"] = "percentile";
      cfg["bootstrap"] = boot;
    }
    cfg["mar"] = opt.mar;
    if (opt.mar) {
      ordered_json mar;
      mar["a_grid_size"] = opt.mar_cfg.a_grid_size;
      mar["z_is_binary"] = opt.mar_cfg.z_is_binary;
      cfg["mar_config"] = mar;
    }
  }
  if (command == "simulate") {
    ordered_json sim;
    if (!opt.catalog.empty()) {
      sim["catalog"] = opt.catalog;
    } else {
      sim["scenario"] = opt.scenario;
      sim["setting"] = opt.setting;
      sim["n1"] = opt.n1;
      sim["n2"] = opt.n2;
    }
    sim["reps"] = opt.reps;
    sim["master_seed"] = opt.seed;
    sim["selection"] = opt.selection;
    sim["with_ci"] = opt.with_ci;
    sim["bootstrap_replicates"] = opt.bootstrap_replicates;
    sim["bootstrap_level"] = opt.bootstrap_level;
    cfg["simulate"] = sim;
  }
  return cfg;
}

void emit_output(const Options& opt, const std::string& content) {
  if (opt.out_path.empty()) {
    std::fwrite(content.data(), 1, content.size(), stdout);
    return;
  }
  write_text_atomic(opt.out_path, content);
}

std::string resolve_format(const Options& opt, const char* fallback) {
  return opt.format.empty() ? fallback : opt.format;
}

void append_kv(std::vector<std::pair<std::string, std::string>>& rows,
               const std::string& key, double value) {
  rows.emplace_back(key, format_double(value));
}

int cmd_estimate(Options& opt) {
  if (opt.aux_path.empty())
    throw ConfigError("estimate: auxiliary CSV path required (--aux)");
  if (opt.primary_path.empty())
    throw ConfigError("estimate: primary CSV path required (--primary)");
  check_common(opt);
  const std::string format = resolve_format(opt, "json");
  const BasisSpec basis = parse_basis(opt.basis);
  if (opt.full_data_baseline && opt.joint_path.empty())
    throw ConfigError("estimate: --full-data-baseline requires --joint");
  if (opt.mar && (opt.inference == "asymptotic" || opt.inference == "both"))
    throw ConfigError(
        "estimate: asymptotic inference is not available with --mar");

  TwoSampleDataset ds;
  ds.aux = read_aux_csv(opt.aux_path);
  ds.primary = read_primary_csv(opt.primary_path);
  std::vector<JointRow> joint;
  if (opt.full_data_baseline) joint = read_joint_csv(opt.joint_path);

  const ValidationResult vr = validate_two_sample_dataset(ds, basis);
  if (!vr.ok) {
    std::fputs("validation failed:\n", stderr);
    for (const std::string& v : vr.violations)
      std::fprintf(stderr, "  - %s\n", v.c_str());
    return 3;
  }

  BootstrapConfig bcfg;
  bcfg.replicates = opt.bootstrap_replicates;
  bcfg.level = opt.bootstrap_level;
  bcfg.seed = opt.seed;

  const bool want_boot =
      opt.inference == "bootstrap" || opt.inference == "both";
  const bool want_asym =
      opt.inference == "asymptotic" || opt.inference == "both";

  EstimateReport est;
  std::optional<InferenceReport> boot;
  std::optional<std::vector<std::vector<double>>> asym;

  if (opt.mar) {
    est = estimate_alpha_mar(ds, basis, opt.mar_cfg);
    if (want_boot)
      boot = bootstrap_inference_mar(ds, basis, bcfg, opt.mar_cfg,
                                     opt.threads);
  } else {
    const TreatmentModel tm = fit_treatment_model(ds.aux);
    const ControlProjection cp =
        fit_control_projection(ds.aux, tm, opt.bw_spec);
    est = estimate_alpha(ds.primary, cp, basis);
    if (want_boot)
      boot = bootstrap_inference(ds, basis, bcfg, opt.bw_spec, opt.threads);
    if (want_asym) asym = asymptotic_variance(ds.primary, cp, basis);
  }

  std::optional<FullDataEstimate> baseline;
  if (opt.full_data_baseline) baseline = full_data_cf_estimate(joint, basis);

  const std::size_t p = basis.size();
  std::vector<double> asym_se, asym_lo, asym_hi;
  if (asym) {
    for (std::size_t k = 0; k < p; ++k) {
      const double se = std::sqrt((*asym)[k][k]);
      const auto [lo, hi] =
          wald_interval(est.alpha_hat[k], se, opt.bootstrap_level);
      asym_se.push_back(se);
      asym_lo.push_back(lo);
      asym_hi.push_back(hi);
    }
  }

  std::string content;
  if (format == "json") {
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["command"] = "estimate";
    doc["config"] = config_echo(opt, "estimate");
    ordered_json estimates;
    estimates["alpha_hat"] = est.alpha_hat;
    estimates["xi_hat"] = est.xi_hat;
    estimates["intercept"] = est.intercept;
    doc["estimates"] = estimates;
    ordered_json inference = ordered_json::object();
    if (boot) {
      ordered_json b;
      b["method"] = "bootstrap";
      b["replicates_requested"] = boot->replicates_requested;
      b["replicates_failed"] = boot->replicates_failed;
      b["level"] = boot->level;
      b["se"] = boot->se;
      b["ci_lower"] = boot->ci_lower;
      b["ci_upper"] = boot->ci_upper;
      b["quantile_probs"] = kReportQuantiles;
      ordered_json qs = ordered_json::array();
      for (const auto& row : boot->quantiles) qs.push_back(row);
      b["quantiles"] = qs;
      inference["bootstrap"] = b;
    }
    if (asym) {
      ordered_json a;
      a["method"] = "asymptotic";
      a["level"] = opt.bootstrap_level;
      a["se"] = asym_se;
      a["ci_lower"] = asym_lo;
      a["ci_upper"] = asym_hi;
      a["covariance"] = *asym;
      inference["asymptotic"] = a;
    }
    doc["inference"] = inference;
    if (baseline) {
      ordered_json fd;
      fd["alpha_hat"] = baseline->alpha;
      fd["rho_hat"] = baseline->rho;
      fd["intercept"] = baseline->intercept;
      doc["full_data_baseline"] = fd;
    }
    doc["diagnostics"] = diagnostics_json(est.diagnostics);
    content = doc.dump(2) + "\n";
  } else {
    std::vector<std::pair<std::string, std::string>> rows;
    for (std::size_t k = 0; k < p; ++k)
      append_kv(rows, "alpha_hat_" + std::to_string(k), est.alpha_hat[k]);
    append_kv(rows, "xi_hat", est.xi_hat);
    append_kv(rows, "intercept", est.intercept);
    if (boot) {
      for (std::size_t k = 0; k < p; ++k) {
        const std::string sk = std::to_string(k);
        append_kv(rows, "bootstrap_se_" + sk, boot->se[k]);
        append_kv(rows, "bootstrap_ci_lower_" + sk, boot->ci_lower[k]);
        append_kv(rows, "bootstrap_ci_upper_" + sk, boot->ci_upper[k]);
        static const char* qnames[5] = {"q025", "q250", "q500", "q750",
                                        "q975"};
        for (std::size_t qi = 0; qi < 5; ++qi)
          append_kv(rows, std::string("bootstrap_") + qnames[qi] + "_" + sk,
                    boot->quantiles[k][qi]);
      }
      rows.emplace_back("bootstrap_replicates_requested",
                        std::to_string(boot->replicates_requested));
      rows.emplace_back("bootstrap_replicates_failed",
                        std::to_string(boot->replicates_failed));
    }
    if (asym) {
      for (std::size_t k = 0; k < p; ++k) {
        const std::string sk = std::to_string(k);
        append_kv(rows, "asymptotic_se_" + sk, asym_se[k]);
        append_kv(rows, "asymptotic_ci_lower_" + sk, asym_lo[k]);
        append_kv(rows, "asymptotic_ci_upper_" + sk, asym_hi[k]);
      }
    }
    if (baseline) {
      for (std::size_t k = 0; k < p; ++k)
        append_kv(rows, "full_data_alpha_hat_" + std::to_string(k),
                  baseline->alpha[k]);
      append_kv(rows, "full_data_rho_hat", baseline->rho);
      append_kv(rows, "full_data_intercept", baseline->intercept);
    }
    append_kv(rows, "bandwidth_used", est.diagnostics.bandwidth_used);
    append_kv(rows, "gram_condition_number",
              est.diagnostics.gram_condition_number);
    append_kv(rows, "support_overlap_fraction",
              est.diagnostics.support_overlap_fraction);
    rows.emplace_back("n1", std::to_string(est.diagnostics.n1));
    rows.emplace_back("n2", std::to_string(est.diagnostics.n2));
    content = render_kv_csv(rows);
  }
  emit_output(opt, content);
  return 0;
}

int cmd_simulate(Options& opt) {
  check_common(opt);
  if (opt.reps < 1) throw ConfigError("simulate: reps must be >= 1");
  const std::string format = resolve_format(opt, "csv");

  const SelectionSpec selection = parse_selection(opt.selection);
  std::vector<CatalogEntry> entries;
  if (!opt.catalog.empty()) {
    entries = builtin_catalog(opt.catalog);
  } else {
    if (opt.n1 < 1 || opt.n2 < 1)
      throw ConfigError("simulate: sample sizes must be positive");
    CatalogEntry e;
    e.scenario = opt.scenario;
    e.setting = opt.setting;
    e.spec = setting_spec(opt.scenario, opt.setting);
    e.spec.n1 = opt.n1;
    e.spec.n2 = opt.n2;
    entries.push_back(std::move(e));
  }
  for (CatalogEntry& e : entries) {
    e.spec.selection = selection;
    if (opt.dgp_alpha) e.spec.alpha = *opt.dgp_alpha;
    if (opt.dgp_gamma) e.spec.gamma = *opt.dgp_gamma;
    if (opt.dgp_beta) e.spec.beta = *opt.dgp_beta;
    if (opt.dgp_l) e.spec.l = *opt.dgp_l;
    if (opt.dgp_eta_sd) e.spec.eta_sd = *opt.dgp_eta_sd;
    if (opt.dgp_z_dist) e.spec.z_dist = parse_dist(*opt.dgp_z_dist);
    if (opt.dgp_u_dist) e.spec.u_dist = parse_dist(*opt.dgp_u_dist);
    if (e.spec.u_dist == Dist::bernoulli_half)
      throw ConfigError("simulate: confounder distribution must be continuous");
  }

  BootstrapConfig bcfg;
  bcfg.replicates = opt.bootstrap_replicates;
  bcfg.level = opt.bootstrap_level;

  std::vector<SimTableRow> rows;
  rows.reserve(entries.size());
  for (const CatalogEntry& e : entries) {
    SimTableRow row;
    row.scenario = e.scenario;
    row.setting = e.setting;
    row.n1 = e.spec.n1;
    row.n2 = e.spec.n2;
    row.result = run_monte_carlo(e.spec, opt.reps, bcfg, opt.seed,
                                 opt.threads, opt.with_ci);
    rows.push_back(std::move(row));
  }

  std::string content;
  if (format == "csv") {
    content = render_simulate_csv(rows, opt.timing);
  } else {
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["command"] = "simulate";
    doc["config"] = config_echo(opt, "simulate");
    ordered_json out_rows = ordered_json::array();
    for (const SimTableRow& row : rows) {
      ordered_json r;
      r["scenario"] = row.scenario;
      r["setting"] = row.setting;
      r["n1"] = row.n1;
      r["n2"] = row.n2;
      r["reps"] = row.result.n_reps;
      r["n_failed"] = row.result.n_failed;
      r["bias_x100"] = row.result.bias_x100;
      r["mse_x100"] = row.result.mse_x100;
      r["coverage_pct"] = finite_or_inf(row.result.coverage_pct);
      if (opt.timing) r["wall_seconds"] = row.result.wall_seconds;
      out_rows.push_back(r);
    }
    doc["rows"] = out_rows;
    content = doc.dump(2) + "\n";
  }
  emit_output(opt, content);
  return 0;
}

int cmd_diagnose(Options& opt) {
  if (opt.aux_path.empty())
    throw ConfigError("diagnose: auxiliary CSV path required (--aux)");
  if (opt.primary_path.empty())
    throw ConfigError("diagnose: primary CSV path required (--primary)");
  const std::string format = resolve_format(opt, "json");
  const BasisSpec basis = parse_basis(opt.basis);

  TwoSampleDataset ds;
  ds.aux = read_aux_csv(opt.aux_path);
  ds.primary = read_primary_csv(opt.primary_path);

  const ValidationResult vr = validate_two_sample_dataset(ds, basis);
  if (!vr.ok) {
    std::fputs("validation failed:\n", stderr);
    for (const std::string& v : vr.violations)
      std::fprintf(stderr, "  - %s\n", v.c_str());
    return 3;
  }

  const TreatmentModel tm = fit_treatment_model(ds.aux);
  const ControlProjection cp = fit_control_projection(ds.aux, tm, opt.bw_spec);
  const double cond = assumption1_diagnostic(ds.primary, cp, basis);

  double a_lo = ds.primary.front().a, a_hi = a_lo;
  double overlap_count = 0.0;
  for (const PrimaryRow& r : ds.primary) {
    a_lo = std::min(a_lo, r.a);
    a_hi = std::max(a_hi, r.a);
    if (r.a >= cp.support_lo && r.a <= cp.support_hi) overlap_count += 1.0;
  }
  const double overlap =
      overlap_count / static_cast<double>(ds.primary.size());

  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = a_lo + (a_hi - a_lo) * static_cast<double>(i) / 100.0;
  const std::vector<double> chat = evaluate_control_projection(cp, grid);

  DiagnosticsBlock diag;
  diag.bandwidth_used = cp.ez_given_a.bandwidth;
  diag.gram_condition_number = cond;
  diag.support_overlap_fraction = overlap;
  diag.n1 = ds.aux.size();
  diag.n2 = ds.primary.size();

  std::vector<std::string> warnings;
  if (overlap == 0.0)
    warnings.push_back(
        "support overlap is zero: auxiliary and primary treatment ranges are "
        "disjoint");

  std::string content;
  if (format == "json") {
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["command"] = "diagnose";
    doc["config"] = config_echo(opt, "diagnose");
    doc["diagnostics"] = diagnostics_json(diag);
    doc["warnings"] = warnings;
    ordered_json curve;
    curve["a"] = grid;
    curve["c_hat"] = chat;
    doc["curve"] = curve;
    content = doc.dump(2) + "\n";
  } else {
    std::vector<std::pair<std::string, std::string>> preamble;
    append_kv(preamble, "bandwidth_used", diag.bandwidth_used);
    append_kv(preamble, "gram_condition_number", diag.gram_condition_number);
    append_kv(preamble, "support_overlap_fraction",
              diag.support_overlap_fraction);
    preamble.emplace_back("n1", std::to_string(diag.n1));
    preamble.emplace_back("n2", std::to_string(diag.n2));
    for (const std::string& w : warnings) preamble.emplace_back("warning", w);
    content = render_diagnose_csv(preamble, grid, chat);
  }
  emit_output(opt, content);
  return 0;
}

struct FlagSet {
  std::string config_path, aux, primary, joint, out, format, bandwidth,
      inference, selection, catalog;
  std::vector<std::string> basis;
  std::uint64_t seed = 0;
  std::size_t reps = 0, bootstrap = 0, n1 = 0, n2 = 0;
  unsigned threads = 0;
  int scenario = 0, setting = 0;
  std::size_t mar_grid = 0;
};

void add_io_flags(CLI::App* sub, FlagSet& flags) {
  sub->add_option("--config", flags.config_path,
                  "JSON configuration file; flags override its keys");
  sub->add_option("--out", flags.out, "Output path (stdout when omitted)");
  sub->add_option("--format", flags.format, "Output format: json or csv");
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Two-sample treatment-effect estimation toolkit"};
  app.require_subcommand(1);

  FlagSet flags;
  bool mar_flag = false;
  bool mar_binary_flag = false;
  bool baseline_flag = false;
  bool no_ci_flag = false;
  bool timing_flag = false;

  CLI::App* est = app.add_subcommand(
      "estimate", "Estimate treatment effects from two CSV samples");
  add_io_flags(est, flags);
  est->add_option("--aux", flags.aux, "Auxiliary sample CSV (header z,a)");
  est->add_option("--primary", flags.primary,
                  "Primary sample CSV (header a,y)");
  est->add_option("--joint", flags.joint,
                  "Joint sample CSV (header z,a,y) for the full-data baseline");
  est->add_option("--seed", flags.seed, "Bootstrap seed");
  est->add_option("--bootstrap", flags.bootstrap,
                  "Number of bootstrap replicates");
  est->add_option("--basis", flags.basis,
                  "Basis terms, e.g. identity or power:2")
      ->delimiter(',');
  est->add_option("--bandwidth", flags.bandwidth,
                  "auto, loocv, or a positive number");
  est->add_option("--inference", flags.inference,
                  "bootstrap, asymptotic, both, or none");
  est->add_option("--threads", flags.threads, "Worker thread count");
  est->add_flag("--mar", mar_flag,
                "Treat outcome missingness as treatment-dependent");
  est->add_flag("--mar-binary-z", mar_binary_flag,
                "Instrument is binary (0/1) in the missingness model");
  est->add_option("--mar-grid", flags.mar_grid,
                  "Integration grid size for the missingness model");
  est->add_flag("--full-data-baseline", baseline_flag,
                "Also fit the classical control-function estimator on --joint");

  CLI::App* sim = app.add_subcommand(
      "simulate", "Run Monte Carlo studies of the estimator");
  add_io_flags(sim, flags);
  sim->add_option("--seed", flags.seed, "Master seed");
  sim->add_option("--reps", flags.reps, "Monte Carlo repetitions");
  sim->add_option("--bootstrap", flags.bootstrap,
                  "Bootstrap replicates per repetition");
  CLI::Option* catalog_opt = sim->add_option(
      "--catalog", flags.catalog,
      "Built-in settings table, e.g. table1-scenario1");
  catalog_opt->excludes(
      sim->add_option("--scenario", flags.scenario, "Outcome model: 1 or 2"));
  catalog_opt->excludes(
      sim->add_option("--setting", flags.setting, "Setting number (1-6)"));
  catalog_opt->excludes(
      sim->add_option("--n1", flags.n1, "Auxiliary sample size"));
  catalog_opt->excludes(
      sim->add_option("--n2", flags.n2, "Primary sample size"));
  sim->add_option("--selection", flags.selection,
                  "mcar or logistic:<coef> outcome selection");
  sim->add_option("--threads", flags.threads, "Worker thread count");
  sim->add_flag("--no-ci", no_ci_flag,
                "Skip bootstrap intervals (bias/MSE only)");
  sim->add_flag("--timing", timing_flag, "Append wall time to each row");

  CLI::App* diag = app.add_subcommand(
      "diagnose", "Check identification diagnostics on two CSV samples");
  add_io_flags(diag, flags);
  diag->add_option("--aux", flags.aux, "Auxiliary sample CSV (header z,a)");
  diag->add_option("--primary", flags.primary,
                   "Primary sample CSV (header a,y)");
  diag->add_option("--basis", flags.basis,
                   "Basis terms, e.g. identity or power:2")
      ->delimiter(',');
  diag->add_option("--bandwidth", flags.bandwidth,
                   "auto, loocv, or a positive number");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* active = est->parsed() ? est : sim->parsed() ? sim : diag;

  try {
    Options opt;
    if (!flags.config_path.empty()) load_config_file(flags.config_path, opt);

    auto given = [&](const char* name) {
      const CLI::Option* o = active->get_option_no_throw(name);
      return o != nullptr && o->count() > 0;
    };
    if (given("--aux")) opt.aux_path = flags.aux;
    if (given("--primary")) opt.primary_path = flags.primary;
    if (active == est && given("--joint")) opt.joint_path = flags.joint;
    if (given("--out")) opt.out_path = flags.out;
    if (given("--format")) set_format(opt, flags.format);
    if (given("--seed")) opt.seed = flags.seed;
    if (given("--basis")) opt.basis = flags.basis;
    if (given("--bandwidth")) set_bandwidth(opt, flags.bandwidth);
    if (active == est && given("--inference"))
      set_inference(opt, flags.inference);
    if (given("--bootstrap")) opt.bootstrap_replicates = flags.bootstrap;
    if (active != diag && given("--threads")) opt.threads = flags.threads;
    if (active == est) {
      if (mar_flag) opt.mar = true;
      if (mar_binary_flag) opt.mar_cfg.z_is_binary = true;
      if (given("--mar-grid")) opt.mar_cfg.a_grid_size = flags.mar_grid;
      if (baseline_flag) opt.full_data_baseline = true;
    }
    if (active == sim) {
      if (given("--reps")) opt.reps = flags.reps;
      if (given("--catalog")) opt.catalog = flags.catalog;
      if (given("--scenario")) opt.scenario = flags.scenario;
      if (given("--setting")) opt.setting = flags.setting;
      if (given("--n1")) opt.n1 = flags.n1;
      if (given("--n2")) opt.n2 = flags.n2;
      if (given("--selection")) opt.selection = flags.selection;
      if (no_ci_flag) opt.with_ci = false;
      if (timing_flag) opt.timing = true;
    }

    if (active == est) return cmd_estimate(opt);
    if (active == sim) return cmd_simulate(opt);
    return cmd_diagnose(opt);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const EstimationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace tsiv::cli
