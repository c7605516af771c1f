#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dakit/config.hpp"
#include "dakit/csv.hpp"
#include "dakit/errors.hpp"
#include "dakit/fusion.hpp"
#include "dakit/models.hpp"
#include "dakit/piecewise.hpp"
#include "dakit/rng.hpp"
#include "dakit/runoff.hpp"
#include "dakit/twin.hpp"
#include "dakit/util.hpp"
#include "dakit/version.hpp"

namespace dakit {

// Default forecast variance for the piecewise runs: with the default
// measurement noise variance 0.25 this puts the gain at 16/17, strong
// enough that an x-only correction every half second keeps the receiver
// locked to the truth (x-driven synchronization), which is what the twin
// scenario is out to demonstrate.
inline constexpr double kDefaultModelVariance = 4.0;

namespace detail {

inline const std::set<std::string> kCommonKeys{
    "scenario", "version", "rng", "config", "out", "seed"};

inline std::set<std::string> with_common(std::set<std::string> keys) {
  keys.insert(kCommonKeys.begin(), kCommonKeys.end());
  return keys;
}

inline const std::set<std::string> kTwinKeys = with_common({
    "model", "lorenz.a1", "lorenz.a2", "lorenz.a3",
    "t_start", "t_end", "output_step",
    "ic", "ic_noise_std",
    "meas.interval", "meas.noise_var", "meas.components", "meas.file",
    "model_variance.policy", "model_variance.value", "model_variance.rate",
    "da.rel_tol", "da.abs_tol",
    "divergence.threshold_fraction", "divergence.hold",
    "error.component", "sweep.runs",
});

inline const std::set<std::string> kRunoffKeys = with_common({
    "parcels", "days", "ia_ratio",
    "amc.mode", "amc.dry_threshold_mm", "amc.wet_threshold_mm",
});

inline const std::set<std::string> kFuseKeys =
    with_common({"fuse.model", "fuse.obs"});

inline void check_scenario_tag(const KeyValueConfig& cfg,
                               const std::string& scenario) {
  const std::string tag = cfg.get_string("scenario", scenario);
  if (tag != scenario)
    throw ConfigError(cfg.origin() + ": config is for scenario '" + tag +
                      "', not '" + scenario + "'");
  const std::string rng = cfg.get_string("rng", kRngName);
  if (rng != kRngName)
    throw ConfigError(cfg.origin() + ": config expects rng '" + rng +
                      "' but this build provides '" + std::string(kRngName) +
                      "'");
}

inline std::string join_doubles(std::span<const double> values) {
  std::string out;
  for (double v : values) {
    if (!out.empty()) out += ", ";
    out += format_double(v);
  }
  return out;
}

inline std::string join_indices(std::span<const std::size_t> values) {
  std::string out;
  for (std::size_t v : values) {
    if (!out.empty()) out += ", ";
    out += std::to_string(v);
  }
  return out;
}

// "VALUE,VARIANCE" -> UncertainScalar, as taken by `fuse --model 10,1`
inline UncertainScalar parse_pair(const std::string& text, const std::string& who) {
  const std::vector<std::string> parts = split(text, ',');
  std::optional<double> value, variance;
  if (parts.size() == 2) {
    value = try_parse_double(trim(parts[0]));
    variance = try_parse_double(trim(parts[1]));
  }
  if (!value || !variance)
    throw ConfigError(who + ": expected 'VALUE,VARIANCE', got '" + text + "'");
  return {*value, *variance};
}

inline void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + out_dir +
                  "': " + ec.message());
}

inline std::string out_path(const std::string& out_dir, const std::string& name) {
  return (std::filesystem::path(out_dir) / name).string();
}

// ---- lorenz-twin / sweep ----

struct TwinScenario {
  std::string model = "lorenz63";
  LorenzParams lorenz;
  TwinConfig twin;
  PiecewiseDaConfig da;
  double threshold_fraction = 0.2;
  double divergence_hold = 0.5;
  std::size_t error_component = 0;
  std::string meas_file;  // empty: synthesize from the truth run
  std::uint64_t sweep_runs = 20;
};

inline ModelVariancePolicy::Kind parse_variance_policy(const std::string& name,
                                                       const std::string& origin) {
  if (name == "constant") return ModelVariancePolicy::Kind::constant;
  if (name == "linear_growth") return ModelVariancePolicy::Kind::linear_growth;
  throw ConfigError(origin + ": model_variance.policy must be 'constant' or "
                             "'linear_growth', got '" + name + "'");
}

inline const char* variance_policy_name(ModelVariancePolicy::Kind kind) {
  return kind == ModelVariancePolicy::Kind::constant ? "constant"
                                                     : "linear_growth";
}

inline TwinScenario resolve_twin(const KeyValueConfig& cfg) {
  TwinScenario s;
  s.model = cfg.get_string("model", s.model);
  s.lorenz.a1 = cfg.get_double("lorenz.a1", s.lorenz.a1);
  s.lorenz.a2 = cfg.get_double("lorenz.a2", s.lorenz.a2);
  s.lorenz.a3 = cfg.get_double("lorenz.a3", s.lorenz.a3);
  s.da.t_start = cfg.get_double("t_start", s.da.t_start);
  s.da.t_end = cfg.get_double("t_end", s.da.t_end);
  s.da.output_step = cfg.get_double("output_step", s.da.output_step);
  s.twin.ic_truth = cfg.get_double_list("ic", s.twin.ic_truth);
  s.twin.ic_noise_std = cfg.get_double_list("ic_noise_std", s.twin.ic_noise_std);
  s.twin.meas_interval = cfg.get_double("meas.interval", s.twin.meas_interval);
  s.twin.meas_noise_var = cfg.get_double("meas.noise_var", s.twin.meas_noise_var);
  s.twin.measured_components =
      cfg.get_index_list("meas.components", s.twin.measured_components);
  s.twin.seed = cfg.get_u64("seed", s.twin.seed);
  s.meas_file = cfg.get_string("meas.file", "");
  s.da.model_variance.kind = parse_variance_policy(
      cfg.get_string("model_variance.policy", "constant"), cfg.origin());
  s.da.model_variance.value =
      cfg.get_double("model_variance.value", kDefaultModelVariance);
  s.da.model_variance.rate = cfg.get_double("model_variance.rate", 0.0);
  s.da.rel_tol = cfg.get_double("da.rel_tol", s.da.rel_tol);
  s.da.abs_tol = cfg.get_double("da.abs_tol", s.da.abs_tol);
  s.threshold_fraction =
      cfg.get_double("divergence.threshold_fraction", s.threshold_fraction);
  s.divergence_hold = cfg.get_double("divergence.hold", s.divergence_hold);
  s.error_component =
      static_cast<std::size_t>(cfg.get_u64("error.component", 0));
  s.sweep_runs = cfg.get_u64("sweep.runs", s.sweep_runs);
  return s;
}

inline OdeSystem build_system(const TwinScenario& s) {
  make_system(s.model);  // validates the name
  if (s.model == "lorenz63") return lorenz_system(s.lorenz);
  return make_system(s.model);
}

inline KeyValueConfig twin_manifest(const std::string& scenario,
                                    const TwinScenario& s,
                                    const std::string& config_path,
                                    const std::string& out_dir) {
  KeyValueConfig m;
  m.set("scenario", scenario);
  m.set("version", kVersion);
  m.set("rng", kRngName);
  if (!config_path.empty()) m.set("config", config_path);
  m.set("out", out_dir);
  m.set_u64("seed", s.twin.seed);
  m.set("model", s.model);
  m.set_double("lorenz.a1", s.lorenz.a1);
  m.set_double("lorenz.a2", s.lorenz.a2);
  m.set_double("lorenz.a3", s.lorenz.a3);
  m.set_double("t_start", s.da.t_start);
  m.set_double("t_end", s.da.t_end);
  m.set_double("output_step", s.da.output_step);
  m.set("ic", join_doubles(s.twin.ic_truth));
  m.set("ic_noise_std", join_doubles(s.twin.ic_noise_std));
  m.set_double("meas.interval", s.twin.meas_interval);
  m.set_double("meas.noise_var", s.twin.meas_noise_var);
  m.set("meas.components", join_indices(s.twin.measured_components));
  if (!s.meas_file.empty()) m.set("meas.file", s.meas_file);
  m.set("model_variance.policy",
        variance_policy_name(s.da.model_variance.kind));
  m.set_double("model_variance.value", s.da.model_variance.value);
  m.set_double("model_variance.rate", s.da.model_variance.rate);
  m.set_double("da.rel_tol", s.da.rel_tol);
  m.set_double("da.abs_tol", s.da.abs_tol);
  m.set_double("divergence.threshold_fraction", s.threshold_fraction);
  m.set_double("divergence.hold", s.divergence_hold);
  m.set_u64("error.component", s.error_component);
  if (scenario == "sweep") m.set_u64("sweep.runs", s.sweep_runs);
  return m;
}

inline TwinRunResult run_twin_scenario(const TwinScenario& s) {
  const OdeSystem system = build_system(s);
  std::optional<MeasurementSeries> external;
  if (!s.meas_file.empty()) external = load_measurements_csv(s.meas_file);
  return run_twin_experiment(system, s.twin, s.da, s.threshold_fraction,
                             s.error_component,
                             external ? &*external : nullptr,
                             s.divergence_hold);
}

inline std::string errors_to_csv(const ErrorSeries& noisy, const ErrorSeries& da) {
  if (noisy.times != da.times)
    throw Error("errors_to_csv: error series sampled on different grids");
  std::string out = "t,err_noisy,err_da\n";
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    out += format_double(noisy.times[i]);
    out += ",";
    out += format_double(noisy.errors[i]);
    out += ",";
    out += format_double(da.errors[i]);
    out += "\n";
  }
  return out;
}

inline std::string events_to_csv(std::span<const AssimilationEvent> events) {
  std::string out = "t,component,model_value,obs_value,fused_value,gain\n";
  for (const auto& e : events) {
    out += format_double(e.time);
    out += "," + std::to_string(e.component);
    out += "," + format_double(e.model_value);
    out += "," + format_double(e.obs_value);
    out += "," + format_double(e.fused_value);
    out += "," + format_double(e.gain);
    out += "\n";
  }
  return out;
}

inline void run_lorenz_twin(const TwinScenario& s, const std::string& config_path,
                            const std::string& out_dir) {
  const TwinRunResult r = run_twin_scenario(s);
  ensure_out_dir(out_dir);
  write_trajectory_csv(r.truth, out_path(out_dir, "truth.csv"));
  write_trajectory_csv(r.noisy_run, out_path(out_dir, "noisy_run.csv"));
  write_trajectory_csv(r.da.trajectory, out_path(out_dir, "da_run.csv"));
  write_file_atomic(out_path(out_dir, "errors.csv"),
                    errors_to_csv(r.err_noisy, r.err_da));
  write_file_atomic(out_path(out_dir, "events.csv"), events_to_csv(r.da.events));
  twin_manifest("lorenz-twin", s, config_path, out_dir)
      .save(out_path(out_dir, "manifest.cfg"));
}

inline void run_sweep(const TwinScenario& s, const std::string& config_path,
                      const std::string& out_dir) {
  if (s.sweep_runs == 0) throw ConfigError("sweep: need sweep.runs > 0");
  if (!s.meas_file.empty())
    throw ConfigError(
        "sweep: meas.file is incompatible with a multi-seed sweep; "
        "measurements must be regenerated per seed");

  struct Row {
    std::uint64_t seed;
    double div_noisy;
    double div_da;
  };
  // Runs share nothing mutable, so they execute concurrently; rows are
  // collected by index, keeping the output order deterministic.
  std::vector<std::future<Row>> futures;
  futures.reserve(s.sweep_runs);
  for (std::uint64_t i = 0; i < s.sweep_runs; ++i) {
    futures.push_back(std::async(std::launch::async, [s, i] {
      TwinScenario run = s;
      run.twin.seed = derive_seed(s.twin.seed, i);
      const TwinRunResult r = run_twin_scenario(run);
      constexpr double inf = std::numeric_limits<double>::infinity();
      return Row{run.twin.seed, r.div_noisy.value_or(inf),
                 r.div_da.value_or(inf)};
    }));
  }
  std::string csv = "seed,divergence_time_noisy,divergence_time_da\n";
  for (auto& f : futures) {
    const Row row = f.get();
    csv += std::to_string(row.seed);
    csv += "," + format_double(row.div_noisy);
    csv += "," + format_double(row.div_da);
    csv += "\n";
  }
  ensure_out_dir(out_dir);
  write_file_atomic(out_path(out_dir, "summary.csv"), csv);
  twin_manifest("sweep", s, config_path, out_dir)
      .save(out_path(out_dir, "manifest.cfg"));
}

// ---- runoff ----

struct RunoffScenario {
  std::string parcels_path;
  std::string days_path;
  RunoffConfig config;
  std::uint64_t seed = 42;  // recorded for provenance; the math is exact
};

inline AmcMode parse_amc_mode(const std::string& name, const std::string& origin) {
  if (name == "fixed_I") return AmcMode::fixed_I;
  if (name == "fixed_II") return AmcMode::fixed_II;
  if (name == "fixed_III") return AmcMode::fixed_III;
  if (name == "auto") return AmcMode::auto_from_antecedent;
  throw ConfigError(origin + ": amc.mode must be one of fixed_I, fixed_II, "
                             "fixed_III, auto; got '" + name + "'");
}

inline const char* amc_mode_name(AmcMode mode) {
  switch (mode) {
    case AmcMode::fixed_I: return "fixed_I";
    case AmcMode::fixed_II: return "fixed_II";
    case AmcMode::fixed_III: return "fixed_III";
    case AmcMode::auto_from_antecedent: return "auto";
  }
  throw std::logic_error("amc_mode_name: bad mode");
}

inline RunoffScenario resolve_runoff(const KeyValueConfig& cfg) {
  RunoffScenario s;
  s.parcels_path = cfg.get_string("parcels", "");
  s.days_path = cfg.get_string("days", "");
  s.config.ia_ratio = cfg.get_double("ia_ratio", s.config.ia_ratio);
  s.config.amc_mode =
      parse_amc_mode(cfg.get_string("amc.mode", "fixed_II"), cfg.origin());
  s.config.amc_dry_threshold_mm =
      cfg.get_double("amc.dry_threshold_mm", s.config.amc_dry_threshold_mm);
  s.config.amc_wet_threshold_mm =
      cfg.get_double("amc.wet_threshold_mm", s.config.amc_wet_threshold_mm);
  s.seed = cfg.get_u64("seed", s.seed);
  return s;
}

inline KeyValueConfig runoff_manifest(const RunoffScenario& s,
                                      const std::string& config_path,
                                      const std::string& out_dir) {
  KeyValueConfig m;
  m.set("scenario", "runoff");
  m.set("version", kVersion);
  m.set("rng", kRngName);
  if (!config_path.empty()) m.set("config", config_path);
  m.set("out", out_dir);
  m.set_u64("seed", s.seed);
  m.set("parcels", s.parcels_path);
  m.set("days", s.days_path);
  m.set_double("ia_ratio", s.config.ia_ratio);
  m.set("amc.mode", amc_mode_name(s.config.amc_mode));
  m.set_double("amc.dry_threshold_mm", s.config.amc_dry_threshold_mm);
  m.set_double("amc.wet_threshold_mm", s.config.amc_wet_threshold_mm);
  return m;
}

inline void run_runoff(const RunoffScenario& s, const std::string& config_path,
                       const std::string& out_dir) {
  if (s.parcels_path.empty())
    throw ConfigError("runoff: no parcels file (--parcels or 'parcels' key)");
  if (s.days_path.empty())
    throw ConfigError("runoff: no days file (--days or 'days' key)");
  const std::vector<LandUseParcel> parcels = load_parcels_csv(s.parcels_path);
  const std::vector<RunoffDay> days = load_runoff_days_csv(s.days_path);
  const double cn2 = weighted_cn(parcels);
  const std::vector<RunoffDay> fused = assimilate_runoff(days);

  std::string csv =
      "day,p_mm,scs_q,model_q,model_var,obs_q,obs_var,fused_q,fused_var\n";
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const RunoffDay& d = fused[i];
    const double cn_day =
        amc_adjust(cn2, antecedent_rainfall(days, i), s.config);
    const double scs_q = runoff_depth(d.rainfall_p, cn_day, s.config);
    csv += d.day;
    csv += "," + format_double(d.rainfall_p);
    csv += "," + format_double(scs_q);
    csv += "," + format_double(d.model_q.value);
    csv += "," + format_double(d.model_q.variance);
    csv += "," + format_double(d.observed_q.value);
    csv += "," + format_double(d.observed_q.variance);
    csv += "," + format_double(d.fused_q->value);
    csv += "," + format_double(d.fused_q->variance);
    csv += "\n";
  }
  ensure_out_dir(out_dir);
  write_file_atomic(out_path(out_dir, "fused.csv"), csv);
  runoff_manifest(s, config_path, out_dir).save(out_path(out_dir, "manifest.cfg"));
}

// ---- fuse ----

struct FuseScenario {
  UncertainScalar model;
  UncertainScalar obs;
  std::uint64_t seed = 42;
};

inline void run_fuse(const FuseScenario& s, const std::string& config_path,
                     const std::string& out_dir, std::ostream& out) {
  const FusionResult r = fuse(s.model, s.obs);
  out << format_double(r.fused.value) << "," << format_double(r.fused.variance)
      << "\n";
  if (out_dir.empty()) return;
  ensure_out_dir(out_dir);
  std::string csv = "value,variance,weight_model,weight_obs,gain\n";
  csv += format_double(r.fused.value);
  csv += "," + format_double(r.fused.variance);
  csv += "," + format_double(r.weight_model);
  csv += "," + format_double(r.weight_obs);
  csv += "," + format_double(r.gain);
  csv += "\n";
  write_file_atomic(out_path(out_dir, "result.csv"), csv);

  KeyValueConfig m;
  m.set("scenario", "fuse");
  m.set("version", kVersion);
  m.set("rng", kRngName);
  if (!config_path.empty()) m.set("config", config_path);
  m.set("out", out_dir);
  m.set_u64("seed", s.seed);
  m.set("fuse.model", format_double(s.model.value) + ", " +
                          format_double(s.model.variance));
  m.set("fuse.obs",
        format_double(s.obs.value) + ", " + format_double(s.obs.variance));
  m.save(out_path(out_dir, "manifest.cfg"));
}

}  // namespace detail

// Entry point behind main(); streams are injected so tests can run the CLI
// in-process. `args` excludes the program name.
inline int run_cli(std::vector<std::string> args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"variance-weighted data assimilation toolkit"};
  app.set_version_flag("--version", kVersion);

  std::string config_path, out_dir, model_pair, obs_pair, parcels_path, days_path;
  std::uint64_t seed = 0;
  double threshold = 0.0;

  CLI::App* fuse_cmd = app.add_subcommand(
      "fuse", "fuse one model estimate with one observation");
  CLI::Option* fuse_model = fuse_cmd->add_option(
      "--model", model_pair, "model estimate as VALUE,VARIANCE");
  CLI::Option* fuse_obs =
      fuse_cmd->add_option("--obs", obs_pair, "observation as VALUE,VARIANCE");

  CLI::App* twin_cmd = app.add_subcommand(
      "lorenz-twin", "twin experiment: truth, noisy start, assimilated run");
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "lorenz-twin over many seeds, divergence-time summary");
  CLI::App* runoff_cmd = app.add_subcommand(
      "runoff", "daily curve-number runoff with model/observation fusion");
  CLI::Option* runoff_parcels = runoff_cmd->add_option(
      "--parcels", parcels_path, "land-use parcels CSV (label,area,cn)");
  CLI::Option* runoff_days = runoff_cmd->add_option(
      "--days", days_path,
      "daily CSV (day,p_mm,model_q,model_var,obs_q,obs_var)");

  std::vector<CLI::Option*> seed_opts, threshold_opts, config_opts;
  for (CLI::App* cmd : {fuse_cmd, twin_cmd, sweep_cmd, runoff_cmd}) {
    config_opts.push_back(
        cmd->add_option("--config", config_path, "key = value config file"));
    seed_opts.push_back(
        cmd->add_option("--seed", seed, "override the config seed"));
    cmd->add_option("--out", out_dir, "output directory");
  }
  for (CLI::App* cmd : {twin_cmd, sweep_cmd}) {
    threshold_opts.push_back(cmd->add_option(
        "--threshold", threshold,
        "divergence threshold as a fraction of peak |truth|"));
    cmd->get_option("--out")->required();
  }
  runoff_cmd->get_option("--out")->required();
  app.require_subcommand(1);

  try {
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const auto given = [](const std::vector<CLI::Option*>& opts) {
    for (const CLI::Option* o : opts)
      if (o->count() > 0) return true;
    return false;
  };
  const bool seed_given = given(seed_opts);
  const bool threshold_given = given(threshold_opts);
  if (!given(config_opts)) config_path.clear();

  try {
    KeyValueConfig cfg;
    if (!config_path.empty()) cfg = KeyValueConfig::load(config_path);

    if (*fuse_cmd) {
      detail::check_scenario_tag(cfg, "fuse");
      cfg.require_known(detail::kFuseKeys);
      detail::FuseScenario s;
      std::string model_text = cfg.get_string("fuse.model", "");
      std::string obs_text = cfg.get_string("fuse.obs", "");
      if (fuse_model->count() > 0) model_text = model_pair;
      if (fuse_obs->count() > 0) obs_text = obs_pair;
      if (model_text.empty())
        throw ConfigError("fuse: no model estimate (--model or 'fuse.model' key)");
      if (obs_text.empty())
        throw ConfigError("fuse: no observation (--obs or 'fuse.obs' key)");
      s.model = detail::parse_pair(model_text, "fuse --model");
      s.obs = detail::parse_pair(obs_text, "fuse --obs");
      s.seed = cfg.get_u64("seed", s.seed);
      if (seed_given) s.seed = seed;
      detail::run_fuse(s, config_path, out_dir, out);
    } else if (*twin_cmd || *sweep_cmd) {
      const std::string scenario = *twin_cmd ? "lorenz-twin" : "sweep";
      detail::check_scenario_tag(cfg, scenario);
      cfg.require_known(detail::kTwinKeys);
      detail::TwinScenario s = detail::resolve_twin(cfg);
      if (seed_given) s.twin.seed = seed;
      if (threshold_given) s.threshold_fraction = threshold;
      if (*twin_cmd)
        detail::run_lorenz_twin(s, config_path, out_dir);
      else
        detail::run_sweep(s, config_path, out_dir);
    } else if (*runoff_cmd) {
      detail::check_scenario_tag(cfg, "runoff");
      cfg.require_known(detail::kRunoffKeys);
      detail::RunoffScenario s = detail::resolve_runoff(cfg);
      if (runoff_parcels->count() > 0) s.parcels_path = parcels_path;
      if (runoff_days->count() > 0) s.days_path = days_path;
      if (seed_given) s.seed = seed;
      detail::run_runoff(s, config_path, out_dir);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dakit
