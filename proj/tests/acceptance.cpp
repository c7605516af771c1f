// Acceptance gate: one line per criterion, nonzero exit if any fail.
// Every tolerance and time budget is pinned here, next to its check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dakit/cli.hpp"
#include "dakit/dakit.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Line {
  bool pass = false;
  std::string text;
};

std::vector<Line> g_lines;

void report(bool pass, int criterion, const std::string& what,
            const std::string& detail = "") {
  std::string text = std::string(pass ? "[PASS]" : "[FAIL]") + " criterion " +
                     std::to_string(criterion) + ": " + what;
  if (!detail.empty()) text += " (" + detail + ")";
  std::puts(text.c_str());
  g_lines.push_back({pass, text});
}

std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f s", s);
  return buf;
}

// ---- criteria 1 and 2: fusion inequality and gain-form agreement ----------

struct FusionPair {
  dakit::UncertainScalar model, obs;
};

std::vector<FusionPair> seeded_pairs() {
  std::mt19937_64 engine(20240601);
  std::uniform_real_distribution<double> value(-50.0, 50.0);
  std::uniform_real_distribution<double> variance(1e-9, 100.0);
  std::vector<FusionPair> pairs(100000);
  for (auto& p : pairs) {
    p.model = {value(engine), variance(engine)};
    p.obs = {value(engine), variance(engine)};
  }
  return pairs;
}

void criterion_1_and_2() {
  const auto pairs = seeded_pairs();

  const auto start1 = Clock::now();
  std::size_t variance_ok = 0, weights_ok = 0;
  for (const auto& p : pairs) {
    const auto r = dakit::fuse(p.model, p.obs);
    if (r.fused.variance < std::min(p.model.variance, p.obs.variance))
      ++variance_ok;
    if (std::fabs(r.weight_model + r.weight_obs - 1.0) <= 1e-12) ++weights_ok;
  }
  const double t1 = seconds_since(start1);
  const bool pass1 = variance_ok == pairs.size() &&
                     weights_ok == pairs.size() && t1 < 1.0;
  report(pass1, 1,
         "fused variance beats both inputs and weights sum to 1 on " +
             std::to_string(pairs.size()) + " seeded pairs",
         std::to_string(variance_ok) + "/" + std::to_string(pairs.size()) +
             " variance, " + std::to_string(weights_ok) + "/" +
             std::to_string(pairs.size()) + " weights, " + fmt_seconds(t1));

  std::size_t agree = 0;
  for (const auto& p : pairs) {
    const auto r = dakit::fuse(p.model, p.obs);
    const double via = dakit::fuse_via_gain(
        p.model.value, p.obs.value,
        dakit::kalman_gain(p.model.variance, p.obs.variance));
    const double scale = std::max(1.0, std::fabs(r.fused.value));
    if (std::fabs(r.fused.value - via) <= 1e-12 * scale) ++agree;
  }
  report(agree == pairs.size(), 2,
         "direct fusion agrees with the gain form within 1e-12 relative",
         std::to_string(agree) + "/" + std::to_string(pairs.size()));
}

// ---- criterion 3: integrator oracles --------------------------------------

void criterion_3() {
  const auto start = Clock::now();
  const dakit::OdeSystem decay{1, [](double, std::span<const double> y,
                                     std::span<double> d) { d[0] = -y[0]; }};
  const dakit::OdeSystem harmonic{2, [](double, std::span<const double> y,
                                        std::span<double> d) {
                                    d[0] = y[1];
                                    d[1] = -y[0];
                                  }};
  const std::vector<double> one{1.0};
  const std::vector<double> cosine{1.0, 0.0};

  const auto exp_traj = dakit::integrate(decay, 0.0, 1.0, one, 1e-8, 1e-8);
  const double exp_err =
      std::fabs(exp_traj.states.back()[0] - std::exp(-1.0));

  const double period = 2.0 * std::acos(-1.0);
  const auto harm = dakit::integrate(harmonic, 0.0, period, cosine);
  double drift = 0.0;
  for (const auto& s : harm.states)
    drift = std::max(drift,
                     std::fabs(0.5 * (s[0] * s[0] + s[1] * s[1]) - 0.5));

  double min_order = 99.0, prev_err = 0.0;
  for (const std::size_t n : {20u, 40u, 80u, 160u}) {
    const auto traj = dakit::integrate_fixed(decay, 0.0, 1.0, one, n);
    const double err = std::fabs(traj.states.back()[0] - std::exp(-1.0));
    if (prev_err > 0.0)
      min_order = std::min(min_order, std::log2(prev_err / err));
    prev_err = err;
  }

  const double t = seconds_since(start);
  const bool pass =
      exp_err < 1e-7 && drift < 1e-6 && min_order >= 4.5 && t < 1.0;
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "decay err %.2e, energy drift %.2e, order %.2f, %s", exp_err,
                drift, min_order, fmt_seconds(t).c_str());
  report(pass, 3,
         "integrator meets the decay, energy-drift, and order oracles",
         detail);
}

// ---- criterion 4: fixed points of the default chaotic system --------------

void criterion_4() {
  const double c = std::sqrt(72.0);
  double worst = 0.0;
  for (const std::array<double, 3> point :
       {std::array<double, 3>{0.0, 0.0, 0.0},
        std::array<double, 3>{c, c, 27.0},
        std::array<double, 3>{-c, -c, 27.0}}) {
    const auto rhs = dakit::lorenz_rhs(point);
    worst = std::max(worst, std::sqrt(rhs[0] * rhs[0] + rhs[1] * rhs[1] +
                                      rhs[2] * rhs[2]));
  }
  char detail[64];
  std::snprintf(detail, sizeof detail, "max norm %.2e", worst);
  report(worst < 1e-10, 4, "vector field vanishes at the fixed points",
         detail);
}

// ---- criteria 5 and 6: twin-experiment behavior over 20 seeds -------------

struct TwinOutcome {
  std::uint64_t seed = 0;
  std::optional<double> div_noisy, div_da;
  double integral_noisy = 0.0, integral_da = 0.0;
};

double integral_to_10s(const dakit::ErrorSeries& err) {
  double sum = 0.0;
  for (std::size_t i = 1; i < err.size() && err.times[i] <= 10.0 + 1e-9; ++i)
    sum += 0.5 * (err.times[i] - err.times[i - 1]) *
           (err.errors[i - 1] + err.errors[i]);
  return sum;
}

std::vector<TwinOutcome> run_twin_set() {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 20; ++i)
    seeds.push_back(dakit::derive_seed(42, i));

  std::vector<std::future<TwinOutcome>> futures;
  for (const auto seed : seeds)
    futures.push_back(std::async(std::launch::async, [seed] {
      dakit::TwinConfig twin;
      twin.seed = seed;
      // the shipped twin-scenario default, as `dakit sweep` runs it
      dakit::PiecewiseDaConfig config;
      config.model_variance.value = dakit::kDefaultModelVariance;
      const auto r = dakit::run_twin_experiment(dakit::lorenz_system(), twin,
                                                config);
      TwinOutcome o;
      o.seed = seed;
      o.div_noisy = r.div_noisy;
      o.div_da = r.div_da;
      o.integral_noisy = integral_to_10s(r.err_noisy);
      o.integral_da = integral_to_10s(r.err_da);
      return o;
    }));

  std::vector<TwinOutcome> outcomes;
  for (auto& f : futures) outcomes.push_back(f.get());
  return outcomes;
}

void criterion_5_and_6() {
  const auto start = Clock::now();
  const auto outcomes = run_twin_set();
  const double t = seconds_since(start);

  std::size_t joint_ok = 0;
  for (const auto& o : outcomes) {
    const bool noisy_early = o.div_noisy.has_value() && *o.div_noisy < 8.0;
    const bool da_late = !o.div_da.has_value() || *o.div_da >= 10.0;
    if (noisy_early && da_late) ++joint_ok;
  }
  const bool pass5 = joint_ok >= 16 && t < 60.0;
  report(pass5, 5,
         "noisy runs diverge before 8 s and assimilated runs hold to 10 s "
         "for >= 80% of 20 seeds",
         std::to_string(joint_ok) + "/20, " + fmt_seconds(t));

  std::size_t dominated = 0;
  std::string worst;
  for (const auto& o : outcomes) {
    if (o.integral_da < o.integral_noisy) {
      ++dominated;
    } else if (worst.empty()) {
      char buf[120];
      std::snprintf(buf, sizeof buf,
                    "seed %llu: assimilated %.1f vs free %.1f",
                    static_cast<unsigned long long>(o.seed), o.integral_da,
                    o.integral_noisy);
      worst = buf;
    }
  }
  std::string detail = std::to_string(dominated) + "/20";
  if (!worst.empty()) detail += "; first counterexample " + worst;
  report(dominated == outcomes.size(), 6,
         "assimilation lowers the integrated x error on [0,10 s] for every "
         "seed",
         detail);
}

// ---- criterion 7: exact measurements pin the trajectory -------------------

void criterion_7() {
  dakit::TwinConfig twin;
  twin.meas_noise_var = 0.0;
  dakit::PiecewiseDaConfig config;
  config.model_variance.value = dakit::kDefaultModelVariance;
  const auto r = dakit::run_twin_experiment(dakit::lorenz_system(), twin,
                                            config);
  double worst = 0.0;
  const auto& traj = r.da.trajectory;
  for (std::size_t m = 0; m < r.measurements.size(); ++m) {
    const double tm = r.measurements.times[m];
    const auto idx = static_cast<std::size_t>(
        std::llround((tm - config.t_start) / config.output_step));
    if (idx >= traj.size() || std::fabs(traj.times[idx] - tm) > 1e-9) {
      report(false, 7, "measurement instant missing from the output grid");
      return;
    }
    for (const auto& [comp, obs] : r.measurements.observations[m])
      worst = std::max(worst,
                       std::fabs(traj.states[idx][comp] - obs.value));
  }
  char detail[64];
  std::snprintf(detail, sizeof detail, "max mismatch %.2e", worst);
  report(worst < 1e-6, 7,
         "zero-variance measurements are matched at every instant", detail);
}

// ---- criterion 8: runoff properties on the demo catchment -----------------

void criterion_8() {
  const auto start = Clock::now();
  bool exact_zero = dakit::retention(100.0) == 0.0;

  bool branch_ok = true;
  for (double cn = 30.0; cn <= 100.0; cn += 5.0) {
    const double ia = 0.2 * dakit::retention(cn);
    branch_ok = branch_ok && dakit::runoff_depth(ia, cn) == 0.0;
    if (ia > 0.0)
      branch_ok = branch_ok && dakit::runoff_depth(ia * 0.5, cn) == 0.0;
  }

  bool monotone = true;
  for (double cn = 30.0; cn <= 100.0 && monotone; cn += 5.0) {
    double prev = -1.0;
    for (double p = 0.0; p <= 300.0; p += 2.5) {
      const double q = dakit::runoff_depth(p, cn);
      monotone = monotone && q >= prev;
      prev = q;
    }
  }
  for (double p = 10.0; p <= 300.0 && monotone; p += 29.0) {
    double prev = -1.0;
    for (double cn = 30.0; cn <= 100.0; cn += 1.0) {
      const double q = dakit::runoff_depth(p, cn);
      monotone = monotone && q >= prev;
      prev = q;
    }
  }

  const auto days = dakit::load_runoff_days_csv(
      std::string(DAKIT_DATA_DIR) + "/synthetic_days.csv");
  std::size_t var_ok = 0;
  const auto fused = dakit::assimilate_runoff(days);
  for (const auto& d : fused)
    if (d.fused_q &&
        d.fused_q->variance <
            std::min(d.model_q.variance, d.observed_q.variance))
      ++var_ok;

  const double t = seconds_since(start);
  const bool pass = exact_zero && branch_ok && monotone &&
                    var_ok == fused.size() && !fused.empty() && t < 1.0;
  report(pass, 8,
         "runoff formula properties hold and demo fusion tightens variance "
         "daily",
         std::to_string(var_ok) + "/" + std::to_string(fused.size()) +
             " days, " + fmt_seconds(t));
}

// ---- criterion 9: manifests reproduce bitwise -----------------------------

int quiet_cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = dakit::run_cli(std::move(args), out, err);
  if (err_text) *err_text = err.str();
  return code;
}

bool same_bytes(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) &&
         dakit::read_file(a.string()) == dakit::read_file(b.string());
}

void criterion_9() {
  const auto base = fs::temp_directory_path() / "dakit_acceptance";
  fs::remove_all(base);
  fs::create_directories(base);
  const std::string data = DAKIT_DATA_DIR;
  std::string err;
  std::vector<std::string> mismatches;

  const auto check_rerun = [&](const std::string& scenario,
                               std::vector<std::string> args,
                               const fs::path& first,
                               const fs::path& second,
                               const std::vector<std::string>& files) {
    if (quiet_cli(std::move(args), &err) != 0) {
      mismatches.push_back(scenario + " run failed: " + err);
      return;
    }
    std::vector<std::string> rerun{scenario, "--config",
                                   (first / "manifest.cfg").string(), "--out",
                                   second.string()};
    if (quiet_cli(rerun, &err) != 0) {
      mismatches.push_back(scenario + " rerun failed: " + err);
      return;
    }
    for (const auto& f : files)
      if (!same_bytes(first / f, second / f))
        mismatches.push_back(scenario + "/" + f);
  };

  check_rerun("fuse",
              {"fuse", "--model", "10,1", "--obs", "20,1", "--out",
               (base / "fuse_a").string()},
              base / "fuse_a", base / "fuse_b", {"result.csv"});

  check_rerun("lorenz-twin",
              {"lorenz-twin", "--out", (base / "twin_a").string()},
              base / "twin_a", base / "twin_b",
              {"truth.csv", "noisy_run.csv", "da_run.csv", "errors.csv",
               "events.csv"});

  check_rerun("runoff",
              {"runoff", "--parcels", data + "/synthetic_parcels.csv",
               "--days", data + "/synthetic_days.csv", "--out",
               (base / "runoff_a").string()},
              base / "runoff_a", base / "runoff_b", {"fused.csv"});

  dakit::write_file_atomic((base / "sweep.cfg").string(),
                           "t_end = 3\noutput_step = 0.05\nsweep.runs = 4\n");
  check_rerun("sweep",
              {"sweep", "--config", (base / "sweep.cfg").string(), "--out",
               (base / "sweep_a").string()},
              base / "sweep_a", base / "sweep_b", {"summary.csv"});

  std::string detail = "fuse, lorenz-twin, runoff, sweep";
  if (!mismatches.empty()) {
    detail = "mismatch: " + mismatches.front();
    if (mismatches.size() > 1)
      detail += " (+" + std::to_string(mismatches.size() - 1) + " more)";
  }
  report(mismatches.empty(), 9,
         "every scenario rerun from its manifest reproduces its CSVs bitwise",
         detail);
}

}  // namespace

int main() {
  criterion_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5_and_6();
  criterion_7();
  criterion_8();
  criterion_9();

  std::size_t failed = 0;
  for (const auto& line : g_lines)
    if (!line.pass) ++failed;
  if (failed > 0)
    std::printf("%zu of %zu criteria failed\n", failed, g_lines.size());
  else
    std::printf("all %zu criteria passed\n", g_lines.size());
  return failed == 0 ? 0 : 1;
}
