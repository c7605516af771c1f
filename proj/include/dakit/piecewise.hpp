#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dakit/errors.hpp"
#include "dakit/fusion.hpp"
#include "dakit/ode.hpp"
#include "dakit/util.hpp"

namespace dakit {

namespace detail {

// Tolerance for matching nominally-equal instants that differ by float
// rounding (e.g. a grid time k*h versus an analytically equal measurement
// time).
inline double time_eps(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

}  // namespace detail

// Measurements ordered by time. Each instant carries one observed value per
// measured component; components absent from the map are unobserved at that
// instant.
struct MeasurementSeries {
  std::vector<double> times;
  std::vector<std::map<std::size_t, UncertainScalar>> observations;

  bool empty() const { return times.empty(); }
  std::size_t size() const { return times.size(); }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& obs : observations) n += obs.size();
    return n;
  }

  void add(double t, std::size_t component, UncertainScalar obs) {
    if (!std::isfinite(t))
      throw std::invalid_argument("MeasurementSeries: non-finite time");
    if (!std::isfinite(obs.value) || !std::isfinite(obs.variance) ||
        obs.variance < 0.0)
      throw std::invalid_argument(
          "MeasurementSeries: observation at t=" + format_double(t) +
          " needs finite value and variance >= 0");
    if (!times.empty() && t < times.back())
      throw std::invalid_argument(
          "MeasurementSeries: time " + format_double(t) +
          " precedes last time " + format_double(times.back()));
    if (!times.empty() && t == times.back()) {
      if (!observations.back().emplace(component, obs).second)
        throw std::invalid_argument(
            "MeasurementSeries: duplicate component " +
            std::to_string(component) + " at t=" + format_double(t));
      return;
    }
    times.push_back(t);
    observations.push_back({{component, obs}});
  }
};

// Variance assigned to the model forecast when it is fused with an
// observation. `linear_growth` restarts from `value` at each assimilation
// instant and grows by `rate` per unit time since, reflecting that trust in
// the forecast decays with lead time, not with absolute time.
struct ModelVariancePolicy {
  enum class Kind { constant, linear_growth };
  Kind kind = Kind::constant;
  double value = 1.0;
  double rate = 0.0;

  double at(double t, double segment_start) const {
    switch (kind) {
      case Kind::constant:
        return value;
      case Kind::linear_growth:
        return value + rate * (t - segment_start);
    }
    throw std::logic_error("ModelVariancePolicy: bad kind");
  }
};

struct PiecewiseDaConfig {
  double t_start = 0.0;
  double t_end = 20.0;
  double output_step = 0.01;
  ModelVariancePolicy model_variance;
  double rel_tol = 1e-6;
  double abs_tol = 1e-9;
};

// One fusion of a model forecast component with an observation.
struct AssimilationEvent {
  double time = 0.0;
  std::size_t component = 0;
  double model_value = 0.0;
  double obs_value = 0.0;
  double fused_value = 0.0;
  double gain = 0.0;
};

struct DaTrajectory {
  Trajectory trajectory;  // sampled on the uniform output grid
  std::vector<AssimilationEvent> events;
};

namespace detail {

// Uniform grid from t_start to t_end inclusive; the final point is t_end
// exactly even when t_start + k*step lands short of it by rounding.
inline std::vector<double> output_grid(double t_start, double t_end,
                                       double step) {
  const double q = (t_end - t_start) / step;
  const long long r = std::llround(q);
  const std::size_t n_intervals =
      (r > 0 && std::abs(q - static_cast<double>(r)) <= 1e-6)
          ? static_cast<std::size_t>(r)
          : static_cast<std::size_t>(std::max(0.0, std::floor(q)));
  std::vector<double> grid;
  grid.reserve(n_intervals + 1);
  for (std::size_t k = 0; k < n_intervals; ++k)
    grid.push_back(t_start + static_cast<double>(k) * step);
  grid.push_back(t_end);
  if (grid.size() >= 2 && grid[grid.size() - 2] >= t_end - time_eps(t_end))
    grid.erase(grid.end() - 2);
  return grid;
}

inline void check_da_args(const OdeSystem& system, std::span<const double> y0,
                          const MeasurementSeries& measurements,
                          const PiecewiseDaConfig& config) {
  if (system.dimension == 0 || !system.rhs)
    throw std::invalid_argument("run_piecewise_da: system has no rhs");
  if (y0.size() != system.dimension)
    throw std::invalid_argument("run_piecewise_da: initial state dimension " +
                                std::to_string(y0.size()) +
                                " does not match system dimension " +
                                std::to_string(system.dimension));
  if (!(config.t_end > config.t_start))
    throw std::invalid_argument("run_piecewise_da: need t_end > t_start");
  if (!(config.output_step > 0.0))
    throw std::invalid_argument("run_piecewise_da: need output_step > 0");
  if (!(config.model_variance.value >= 0.0) ||
      !(config.model_variance.rate >= 0.0))
    throw std::invalid_argument(
        "run_piecewise_da: model variance value and rate must be >= 0");
  for (std::size_t m = 0; m < measurements.size(); ++m) {
    const double t = measurements.times[m];
    if (t <= config.t_start + time_eps(t) || t > config.t_end + time_eps(t))
      throw ConfigError("run_piecewise_da: measurement time " +
                        format_double(t) + " outside (t_start, t_end]");
    for (const auto& [comp, obs] : measurements.observations[m]) {
      if (comp >= system.dimension)
        throw ConfigError("run_piecewise_da: measured component " +
                          std::to_string(comp) +
                          " out of range for dimension " +
                          std::to_string(system.dimension));
      (void)obs;
    }
  }
}

}  // namespace detail

// Piecewise assimilation: integrate the model between measurement instants;
// at each instant replace every measured component of the forecast with its
// inverse-variance fusion against the observation, then continue from the
// updated state. Unmeasured components pass through unchanged. The output
// trajectory is sampled on the uniform grid; a grid point coinciding with a
// measurement instant carries the post-fusion state.
inline DaTrajectory run_piecewise_da(const OdeSystem& system,
                                     std::span<const double> y0,
                                     const MeasurementSeries& measurements,
                                     const PiecewiseDaConfig& config) {
  detail::check_da_args(system, y0, measurements, config);
  const std::size_t dim = system.dimension;
  const std::vector<double> grid =
      detail::output_grid(config.t_start, config.t_end, config.output_step);

  DaTrajectory result;
  result.trajectory.times.reserve(grid.size());
  result.trajectory.states.reserve(grid.size());
  result.trajectory.derivatives.reserve(grid.size());

  std::vector<double> deriv_buf(dim);
  const auto push_sample = [&](double t, const std::vector<double>& state) {
    system.rhs(t, std::span<const double>(state), std::span<double>(deriv_buf));
    result.trajectory.times.push_back(t);
    result.trajectory.states.push_back(state);
    result.trajectory.derivatives.push_back(deriv_buf);
  };

  std::vector<double> y(y0.begin(), y0.end());
  double t_cur = config.t_start;
  double segment_start = config.t_start;
  std::size_t g = 0;  // next grid index to emit

  const auto emit_before = [&](const Trajectory& seg, double t_limit) {
    while (g < grid.size() && grid[g] < t_limit - detail::time_eps(t_limit)) {
      push_sample(grid[g], sample_at(seg, std::min(grid[g], seg.end_time())));
      ++g;
    }
  };

  const auto integrate_segment = [&](double t_to) {
    try {
      return integrate(system, t_cur, t_to, y, config.rel_tol, config.abs_tol);
    } catch (const IntegrationError& e) {
      throw IntegrationError("run_piecewise_da: segment [" +
                                 format_double(t_cur) + ", " +
                                 format_double(t_to) + "] failed: " + e.what(),
                             e.last_good_time);
    }
  };

  // grid points at or before t_start (grid[0] == t_start)
  while (g < grid.size() &&
         grid[g] <= t_cur + detail::time_eps(grid[g])) {
    push_sample(grid[g], y);
    ++g;
  }

  for (std::size_t m = 0; m < measurements.size(); ++m) {
    const double t_m = measurements.times[m];
    if (t_m - t_cur > detail::time_eps(t_m)) {
      const Trajectory seg = integrate_segment(t_m);
      emit_before(seg, t_m);
      y = seg.states.back();
      t_cur = t_m;
    }

    const double model_var =
        config.model_variance.at(t_m, segment_start);
    for (const auto& [comp, obs] : measurements.observations[m]) {
      const double gain = kalman_gain(model_var, obs.variance);
      const double fused = fuse_via_gain(y[comp], obs.value, gain);
      result.events.push_back(
          {t_m, comp, y[comp], obs.value, fused, gain});
      y[comp] = fused;
    }
    segment_start = t_m;

    // a grid point riding on this instant gets the post-fusion state
    while (g < grid.size() &&
           std::abs(grid[g] - t_m) <= detail::time_eps(grid[g])) {
      push_sample(grid[g], y);
      ++g;
    }
  }

  if (config.t_end - t_cur > detail::time_eps(config.t_end)) {
    const Trajectory seg = integrate_segment(config.t_end);
    emit_before(seg, config.t_end + 2.0 * detail::time_eps(config.t_end));
    y = seg.states.back();
    t_cur = config.t_end;
  }
  while (g < grid.size()) {
    push_sample(grid[g], y);
    ++g;
  }
  return result;
}

// Plain model run on the same grid machinery; bitwise identical to
// run_piecewise_da with an empty measurement series.
inline Trajectory free_run(const OdeSystem& system, std::span<const double> y0,
                           const PiecewiseDaConfig& config) {
  return run_piecewise_da(system, y0, MeasurementSeries{}, config).trajectory;
}

}  // namespace dakit
