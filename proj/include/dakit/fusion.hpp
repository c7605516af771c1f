#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "dakit/errors.hpp"

namespace dakit {

// A scalar value paired with its variance (units squared). The atom that
// every fusion operates on.
struct UncertainScalar {
  double value = 0.0;
  double variance = 0.0;
};

// Outcome of fusing a model value with an observation.
// weight_model + weight_obs == 1, gain == weight_obs, and fused.variance
// never exceeds the smaller input variance.
struct FusionResult {
  UncertainScalar fused;
  double weight_model = 0.0;
  double weight_obs = 0.0;
  double gain = 0.0;
};

namespace detail {

inline void check_uncertain(const UncertainScalar& s, const char* who) {
  if (!std::isfinite(s.value))
    throw std::invalid_argument(std::string(who) + ": value must be finite");
  if (!std::isfinite(s.variance) || s.variance < 0.0)
    throw std::invalid_argument(std::string(who) + ": variance must be finite and >= 0");
}

inline void check_variance(double v, const char* who) {
  if (!std::isfinite(v) || v < 0.0)
    throw std::invalid_argument(std::string(who) + ": variance must be finite and >= 0");
}

}  // namespace detail

// Kalman gain of the scalar update: var_model / (var_model + var_obs).
// Lies in [0,1]; 1 means the observation is trusted completely.
inline double kalman_gain(double var_model, double var_obs) {
  detail::check_variance(var_model, "kalman_gain");
  detail::check_variance(var_obs, "kalman_gain");
  const double sum = var_model + var_obs;
  if (sum == 0.0)
    throw DegenerateInputError("kalman_gain: both variances are zero");
  return var_model / sum;
}

// Innovation form of the update: t_model + gain * (t_obs - t_model).
// gain = 1 returns t_obs exactly; the rounded innovation sum would not.
inline double fuse_via_gain(double t_model, double t_obs, double gain) {
  if (!(gain >= 0.0 && gain <= 1.0))
    throw std::invalid_argument("fuse_via_gain: gain must lie in [0,1]");
  if (gain == 1.0) return t_obs;
  return t_model + gain * (t_obs - t_model);
}

// Inverse-variance weighted fusion of two uncertain scalars:
//   weight_model = var_obs / (var_model + var_obs)
//   weight_obs   = var_model / (var_model + var_obs)
//   fused value  = weight_model * model + weight_obs * obs
//   fused var    = var_model * var_obs / (var_model + var_obs)
// A zero-variance input wins outright. Two zero-variance inputs are only
// admissible when they agree.
inline FusionResult fuse(const UncertainScalar& model, const UncertainScalar& obs) {
  detail::check_uncertain(model, "fuse(model)");
  detail::check_uncertain(obs, "fuse(obs)");
  const double vm = model.variance;
  const double vo = obs.variance;
  const double sum = vm + vo;
  if (sum == 0.0) {
    if (model.value == obs.value)
      return FusionResult{{model.value, 0.0}, 0.5, 0.5, 0.5};
    throw DegenerateInputError(
        "fuse: both variances are zero and the values disagree");
  }
  FusionResult r;
  r.weight_model = vo / sum;
  r.weight_obs = vm / sum;
  r.gain = r.weight_obs;
  r.fused.value = r.weight_model * model.value + r.weight_obs * obs.value;
  r.fused.variance = vm * r.weight_model;  // == vm*vo/sum, cannot overflow
  return r;
}

}  // namespace dakit
