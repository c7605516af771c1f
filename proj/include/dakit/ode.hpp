#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dakit/errors.hpp"
#include "dakit/util.hpp"

namespace dakit {

// First-order system y' = f(t, y). `rhs` writes the derivative of `state`
// into `deriv`; both spans have length `dimension`. The rhs must be
// deterministic: the integrator assumes repeated evaluation at the same
// point yields the same value.
struct OdeSystem {
  std::size_t dimension = 0;
  std::function<void(double t, std::span<const double> state, std::span<double> deriv)> rhs;
};

// Time-ordered state samples. `derivatives` holds f(t, y) at every sample
// and is what makes interpolation possible; loaders that only recover
// values leave it empty.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> derivatives;

  std::size_t size() const { return times.size(); }
  std::size_t dimension() const { return states.empty() ? 0 : states.front().size(); }
  double start_time() const { return times.front(); }
  double end_time() const { return times.back(); }
  bool has_derivatives() const { return derivatives.size() == times.size() && !times.empty(); }
};

namespace detail {

// Dormand-Prince 5(4) pair. FSAL: stage 7 is stage 1 of the next step.
inline constexpr std::array<double, 7> kDpC{
    0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0};
inline constexpr std::array<std::array<double, 6>, 7> kDpA{{
    {},
    {1.0 / 5.0},
    {3.0 / 40.0, 9.0 / 40.0},
    {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
    {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
    {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0},
    {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0},
}};
inline constexpr std::array<double, 7> kDpB{
    35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
    11.0 / 84.0, 0.0};
// b - bhat: weights of the embedded 4th-order error estimate.
inline constexpr std::array<double, 7> kDpE{
    71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
    -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0};

// PI step controller constants. hnew/h is clamped to [0.2, 5].
inline constexpr double kSafety = 0.9;
inline constexpr double kMinFactor = 0.2;
inline constexpr double kMaxFactor = 5.0;
inline constexpr double kBeta = 0.04;
inline constexpr double kExpo1 = 0.2 - 0.75 * kBeta;
inline constexpr std::size_t kMaxSteps = 10'000'000;

struct DpStepper {
  const OdeSystem& system;
  std::size_t n;
  std::array<std::vector<double>, 7> k;
  std::vector<double> ytmp;

  explicit DpStepper(const OdeSystem& sys)
      : system(sys), n(sys.dimension), ytmp(sys.dimension) {
    for (auto& ki : k) ki.resize(n);
  }

  void eval(double t, const std::vector<double>& y, std::vector<double>& out) {
    system.rhs(t, std::span<const double>(y), std::span<double>(out));
  }

  // One trial step of size h from (t, y); requires k[0] = f(t, y).
  // Leaves the 5th-order result in ynew and k[6] = f(t + h, ynew).
  void trial(double t, double h, const std::vector<double>& y,
             std::vector<double>& ynew) {
    for (std::size_t s = 1; s <= 5; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += kDpA[s][j] * k[j][i];
        ytmp[i] = y[i] + h * acc;
      }
      eval(t + kDpC[s] * h, ytmp, k[s]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      ynew[i] = y[i] + h * (kDpB[0] * k[0][i] + kDpB[2] * k[2][i] +
                            kDpB[3] * k[3][i] + kDpB[4] * k[4][i] +
                            kDpB[5] * k[5][i]);
    }
    eval(t + h, ynew, k[6]);
  }

  // Scaled RMS error of the last trial step.
  double error_norm(double h, const std::vector<double>& y,
                    const std::vector<double>& ynew, double rel_tol,
                    double abs_tol) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (kDpE[0] * k[0][i] + kDpE[2] * k[2][i] +
                            kDpE[3] * k[3][i] + kDpE[4] * k[4][i] +
                            kDpE[5] * k[5][i] + kDpE[6] * k[6][i]);
      const double sc =
          abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double r = e / sc;
      sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(n));
  }
};

// Starting step size estimate (Hairer's heuristic): match the scale of f,
// then refine with a crude second-derivative probe. Requires k[0] = f(t0, y).
inline double initial_step(DpStepper& st, double t0, double t1,
                           const std::vector<double>& y, double rel_tol,
                           double abs_tol) {
  const std::size_t n = st.n;
  const double span = t1 - t0;
  double d0 = 0.0, d1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = abs_tol + rel_tol * std::abs(y[i]);
    const double a = y[i] / sc;
    const double b = st.k[0][i] / sc;
    d0 += a * a;
    d1 += b * b;
  }
  d0 = std::sqrt(d0 / static_cast<double>(n));
  d1 = std::sqrt(d1 / static_cast<double>(n));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
  h0 = std::min(h0, span);
  for (std::size_t i = 0; i < n; ++i) st.ytmp[i] = y[i] + h0 * st.k[0][i];
  st.eval(t0 + h0, st.ytmp, st.k[1]);
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sc = abs_tol + rel_tol * std::abs(y[i]);
    const double r = (st.k[1][i] - st.k[0][i]) / sc;
    d2 += r * r;
  }
  d2 = std::sqrt(d2 / static_cast<double>(n)) / h0;
  const double m = std::max(d1, d2);
  const double h1 =
      (m <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 0.2);
  return std::min({100.0 * h0, h1, span});
}

inline void check_integrate_args(const OdeSystem& system, double t0, double t1,
                                 std::span<const double> y0, double rel_tol,
                                 double abs_tol) {
  if (system.dimension == 0 || !system.rhs)
    throw std::invalid_argument("integrate: system has no rhs");
  if (y0.size() != system.dimension)
    throw std::invalid_argument(
        "integrate: initial state dimension " + std::to_string(y0.size()) +
        " does not match system dimension " + std::to_string(system.dimension));
  if (!(t1 > t0))
    throw std::invalid_argument("integrate: need t1 > t0");
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0) || !std::isfinite(rel_tol) ||
      !std::isfinite(abs_tol))
    throw std::invalid_argument("integrate: tolerances must be positive");
  for (double v : y0)
    if (!std::isfinite(v))
      throw std::invalid_argument("integrate: initial state must be finite");
}

}  // namespace detail

// Adaptive Dormand-Prince 5(4) integration from t0 to t1. The returned
// trajectory holds every accepted step, t0 and t1 included, with f(t, y)
// stored at each knot. Bitwise deterministic for identical inputs.
inline Trajectory integrate(const OdeSystem& system, double t0, double t1,
                            std::span<const double> y0, double rel_tol = 1e-6,
                            double abs_tol = 1e-9) {
  detail::check_integrate_args(system, t0, t1, y0, rel_tol, abs_tol);
  const std::size_t n = system.dimension;
  detail::DpStepper st(system);
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> ynew(n);

  st.eval(t0, y, st.k[0]);
  Trajectory out;
  out.times.push_back(t0);
  out.states.push_back(y);
  out.derivatives.push_back(st.k[0]);

  double h = detail::initial_step(st, t0, t1, y, rel_tol, abs_tol);
  const double hmin = 16.0 * std::numeric_limits<double>::epsilon() *
                      std::max({1.0, std::abs(t0), std::abs(t1)});
  double t = t0;
  double facold = 1e-4;
  bool rejected = false;
  std::size_t steps = 0;

  while (t < t1) {
    if (++steps > detail::kMaxSteps)
      throw IntegrationError(
          "integrate: step budget exhausted at t=" + format_double(t), t);
    const bool last = (t + 1.01 * h >= t1);
    if (last) h = t1 - t;

    st.trial(t, h, y, ynew);
    const double err = st.error_norm(h, y, ynew, rel_tol, abs_tol);
    const bool usable = std::isfinite(err);

    if (usable && err <= 1.0) {
      t = last ? t1 : t + h;
      y.swap(ynew);
      st.k[0].swap(st.k[6]);
      out.times.push_back(t);
      out.states.push_back(y);
      out.derivatives.push_back(st.k[0]);

      const double fac11 = std::pow(err, detail::kExpo1);
      const double fac =
          std::clamp(fac11 / (std::pow(facold, detail::kBeta) * detail::kSafety),
                     1.0 / detail::kMaxFactor, 1.0 / detail::kMinFactor);
      double hnew = h / fac;
      if (rejected) hnew = std::min(hnew, h);
      rejected = false;
      facold = std::max(err, 1e-4);
      h = hnew;
    } else {
      const double divisor =
          usable ? std::min(1.0 / detail::kMinFactor,
                            std::pow(err, detail::kExpo1) / detail::kSafety)
                 : 1.0 / detail::kMinFactor;
      h = h / divisor;
      rejected = true;
    }

    if (t < t1) {
      if ((h < hmin && (t1 - t) > hmin) || t + h == t)
        throw IntegrationError(
            "integrate: step size underflow at t=" + format_double(t) +
                " (last good time " + format_double(t) + ")",
            t);
    }
  }
  return out;
}

// Fixed-step Dormand-Prince 5 over n_steps equal steps; no error control.
inline Trajectory integrate_fixed(const OdeSystem& system, double t0, double t1,
                                  std::span<const double> y0,
                                  std::size_t n_steps) {
  detail::check_integrate_args(system, t0, t1, y0, 1.0, 1.0);
  if (n_steps == 0)
    throw std::invalid_argument("integrate_fixed: need n_steps > 0");
  const std::size_t n = system.dimension;
  detail::DpStepper st(system);
  std::vector<double> y(y0.begin(), y0.end());
  std::vector<double> ynew(n);
  const double h = (t1 - t0) / static_cast<double>(n_steps);

  st.eval(t0, y, st.k[0]);
  Trajectory out;
  out.times.push_back(t0);
  out.states.push_back(y);
  out.derivatives.push_back(st.k[0]);

  for (std::size_t s = 0; s < n_steps; ++s) {
    const double t = t0 + static_cast<double>(s) * h;
    st.trial(t, h, y, ynew);
    y.swap(ynew);
    st.k[0].swap(st.k[6]);
    const double tnext = (s + 1 == n_steps) ? t1 : t0 + static_cast<double>(s + 1) * h;
    out.times.push_back(tnext);
    out.states.push_back(y);
    out.derivatives.push_back(st.k[0]);
  }
  return out;
}

// State at time t by cubic Hermite interpolation between the bracketing
// knots; a query that hits a stored time returns the stored state bit for
// bit. t must lie within [start_time, end_time].
inline std::vector<double> sample_at(const Trajectory& traj, double t) {
  if (traj.size() == 0) throw Error("sample: empty trajectory");
  const auto& times = traj.times;
  if (t < times.front() || t > times.back())
    throw OutOfRangeError("sample: t=" + format_double(t) + " outside [" +
                          format_double(times.front()) + ", " +
                          format_double(times.back()) + "]");
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  if (hi == times.size()) return traj.states.back();  // t == end_time
  const std::size_t lo = hi - 1;
  if (times[lo] == t) return traj.states[lo];
  if (!traj.has_derivatives())
    throw Error("sample: trajectory has no stored derivatives");

  const double h = times[hi] - times[lo];
  const double u = (t - times[lo]) / h;
  const auto& y0 = traj.states[lo];
  const auto& y1 = traj.states[hi];
  const auto& d0 = traj.derivatives[lo];
  const auto& d1 = traj.derivatives[hi];
  std::vector<double> out(y0.size());
  // Newton form of the cubic Hermite: exact at both knots and free of the
  // basis-sum rounding that would perturb constant data
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double dy = y1[i] - y0[i];
    out[i] = y0[i] + u * dy +
             u * (u - 1.0) *
                 ((1.0 - 2.0 * u) * dy + (u - 1.0) * h * d0[i] +
                  u * h * d1[i]);
  }
  return out;
}

inline std::vector<std::vector<double>> sample(const Trajectory& traj,
                                               std::span<const double> query_times) {
  std::vector<std::vector<double>> out;
  out.reserve(query_times.size());
  for (double t : query_times) out.push_back(sample_at(traj, t));
  return out;
}

}  // namespace dakit
