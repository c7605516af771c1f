#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dakit/errors.hpp"
#include "dakit/ode.hpp"
#include "dakit/piecewise.hpp"
#include "dakit/rng.hpp"
#include "dakit/util.hpp"

namespace dakit {

// Twin experiment setup: a truth run, a perturbed-start run, and synthetic
// noisy measurements of the truth.
struct TwinConfig {
  std::vector<double> ic_truth{5.0, 5.0, 5.0};
  std::vector<double> ic_noise_std{0.5, 0.5, 0.5};
  double meas_interval = 0.5;
  double meas_noise_var = 0.25;
  std::vector<std::size_t> measured_components{0};
  std::uint64_t seed = 42;
};

// Sub-stream indices off the experiment seed; keeps IC noise and
// measurement noise independent of each other and of run count.
inline constexpr std::uint64_t kIcNoiseStream = 0;
inline constexpr std::uint64_t kMeasNoiseStream = 1;

// Reference trajectory, integrated much tighter than the assimilation runs
// so truth error is negligible against the perturbations under study.
inline Trajectory generate_truth(const OdeSystem& system,
                                 const TwinConfig& twin,
                                 const PiecewiseDaConfig& config) {
  if (config.t_end == config.t_start) {
    if (twin.ic_truth.size() != system.dimension)
      throw std::invalid_argument(
          "generate_truth: initial condition size mismatch");
    Trajectory single;
    single.times.push_back(config.t_start);
    single.states.push_back(twin.ic_truth);
    std::vector<double> dydt(system.dimension);
    system.rhs(config.t_start, twin.ic_truth, dydt);
    single.derivatives.push_back(std::move(dydt));
    return single;
  }
  PiecewiseDaConfig tight = config;
  tight.rel_tol = 1e-9;
  tight.abs_tol = 1e-12;
  return free_run(system, twin.ic_truth, tight);
}

inline std::vector<double> perturb_ic(std::span<const double> ic,
                                      std::span<const double> noise_std,
                                      std::uint64_t seed) {
  if (ic.size() != noise_std.size())
    throw std::invalid_argument("perturb_ic: ic and noise_std sizes differ");
  NormalSampler normal(derive_seed(seed, kIcNoiseStream));
  std::vector<double> out(ic.begin(), ic.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double draw = normal();  // always drawn, so streams line up when std=0
    out[i] += noise_std[i] * draw;
  }
  return out;
}

// Noisy observations of the truth at t_start + k*interval, k >= 1, for every
// measured component. Draw order is (instant, component) row-major.
inline MeasurementSeries synthesize_measurements(const Trajectory& truth,
                                                 const TwinConfig& twin) {
  if (!(twin.meas_interval > 0.0))
    throw std::invalid_argument("synthesize_measurements: need interval > 0");
  if (!(twin.meas_noise_var >= 0.0) || !std::isfinite(twin.meas_noise_var))
    throw std::invalid_argument(
        "synthesize_measurements: need noise variance >= 0");
  for (std::size_t c : twin.measured_components)
    if (c >= truth.dimension())
      throw std::invalid_argument(
          "synthesize_measurements: component " + std::to_string(c) +
          " out of range for dimension " + std::to_string(truth.dimension()));

  const double t0 = truth.start_time();
  const double t1 = truth.end_time();
  const double sigma = std::sqrt(twin.meas_noise_var);
  NormalSampler normal(derive_seed(twin.seed, kMeasNoiseStream));
  MeasurementSeries series;
  for (std::size_t k = 1;; ++k) {
    double t = t0 + static_cast<double>(k) * twin.meas_interval;
    if (t > t1 + detail::time_eps(t1)) break;
    t = std::min(t, t1);
    const std::vector<double> state = sample_at(truth, t);
    for (std::size_t c : twin.measured_components) {
      const double draw = normal();
      series.add(t, c, {state[c] + sigma * draw, twin.meas_noise_var});
    }
  }
  return series;
}

// |truth - run| for one component, on the truth sample times over the
// overlap of the two records. Identical time grids take the fast path with
// no interpolation.
struct ErrorSeries {
  std::vector<double> times;
  std::vector<double> errors;
  std::size_t size() const { return times.size(); }
};

inline ErrorSeries error_series(const Trajectory& truth, const Trajectory& run,
                                std::size_t component) {
  if (truth.size() == 0 || run.size() == 0)
    throw std::invalid_argument("error_series: empty trajectory");
  if (component >= truth.dimension() || component >= run.dimension())
    throw std::invalid_argument("error_series: component out of range");

  ErrorSeries out;
  if (truth.times == run.times) {
    out.times = truth.times;
    out.errors.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
      out.errors.push_back(
          std::abs(truth.states[i][component] - run.states[i][component]));
    return out;
  }

  const double lo = std::max(truth.start_time(), run.start_time());
  const double hi = std::min(truth.end_time(), run.end_time());
  if (!(hi > lo))
    throw std::invalid_argument("error_series: records do not overlap");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double t = truth.times[i];
    if (t < lo || t > hi) continue;
    const std::vector<double> r = sample_at(run, t);
    out.times.push_back(t);
    out.errors.push_back(std::abs(truth.states[i][component] - r[component]));
  }
  return out;
}

// First time the error exceeds `threshold` and stays above it for at least
// `hold` time units. An exceedance running into the end of the record counts
// as sustained. nullopt if the error never diverges. The default hold is one
// assimilation cycle at the default measurement cadence: long enough that a
// run being re-pinned to the truth every cycle never counts as diverged,
// short enough to catch decorrelated orbits whose pointwise difference dips
// through zero each lobe oscillation.
inline std::optional<double> divergence_time(const ErrorSeries& err,
                                             double threshold,
                                             double hold = 0.5) {
  if (!(threshold > 0.0) || !std::isfinite(threshold))
    throw std::invalid_argument("divergence_time: need threshold > 0");
  if (!(hold >= 0.0))
    throw std::invalid_argument("divergence_time: need hold >= 0");
  const std::size_t n = err.size();
  std::size_t j = 0;  // end of the current above-threshold run
  for (std::size_t i = 0; i < n; ++i) {
    if (!(err.errors[i] > threshold)) continue;
    if (j < i + 1) j = i + 1;
    while (j < n && err.errors[j] > threshold) ++j;
    // [i, j) is above threshold; sustained if it spans `hold` or hits the end
    if (err.times[j - 1] - err.times[i] >= hold - detail::time_eps(hold) ||
        j == n)
      return err.times[i];
    i = j;  // resume after the too-short run
  }
  return std::nullopt;
}

struct TwinRunResult {
  Trajectory truth;
  std::vector<double> noisy_ic;
  Trajectory noisy_run;          // perturbed start, no assimilation
  DaTrajectory da;               // perturbed start, measurements assimilated
  MeasurementSeries measurements;
  ErrorSeries err_noisy;
  ErrorSeries err_da;
  double threshold = 0.0;
  std::optional<double> div_noisy;
  std::optional<double> div_da;
};

// Full twin experiment. `threshold_fraction` scales the peak |truth| of the
// error component into the divergence threshold. Passing
// `external_measurements` replaces the synthesized series (recorded data
// instead of simulated sensors); the truth run still provides the error
// baseline.
inline TwinRunResult run_twin_experiment(
    const OdeSystem& system, const TwinConfig& twin,
    const PiecewiseDaConfig& config, double threshold_fraction = 0.2,
    std::size_t error_component = 0,
    const MeasurementSeries* external_measurements = nullptr,
    double divergence_hold = 0.5) {
  if (twin.ic_truth.size() != system.dimension)
    throw std::invalid_argument(
        "run_twin_experiment: ic dimension does not match system");
  if (!(threshold_fraction > 0.0))
    throw std::invalid_argument(
        "run_twin_experiment: need threshold_fraction > 0");
  if (error_component >= system.dimension)
    throw std::invalid_argument(
        "run_twin_experiment: error component out of range");

  TwinRunResult r;
  r.truth = generate_truth(system, twin, config);
  r.noisy_ic = perturb_ic(twin.ic_truth, twin.ic_noise_std, twin.seed);
  r.measurements = external_measurements ? *external_measurements
                                         : synthesize_measurements(r.truth, twin);
  r.noisy_run = free_run(system, r.noisy_ic, config);
  r.da = run_piecewise_da(system, r.noisy_ic, r.measurements, config);
  r.err_noisy = error_series(r.truth, r.noisy_run, error_component);
  r.err_da = error_series(r.truth, r.da.trajectory, error_component);

  double peak = 0.0;
  for (const auto& s : r.truth.states)
    peak = std::max(peak, std::abs(s[error_component]));
  if (!(peak > 0.0))
    throw DegenerateInputError(
        "run_twin_experiment: truth component is identically zero; "
        "threshold would be zero");
  r.threshold = threshold_fraction * peak;
  r.div_noisy = divergence_time(r.err_noisy, r.threshold, divergence_hold);
  r.div_da = divergence_time(r.err_da, r.threshold, divergence_hold);
  return r;
}

}  // namespace dakit
