#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dakit/errors.hpp"
#include "dakit/fusion.hpp"
#include "dakit/util.hpp"

namespace dakit {

// One land-use class inside a catchment. Units: area in any consistent unit
// (only ratios matter), cn dimensionless in (0, 100].
struct LandUseParcel {
  std::string label;
  double area = 0.0;
  double cn = 0.0;
};

// Antecedent moisture handling for the curve number. `auto_from_antecedent`
// picks the class per day from the preceding 5-day rainfall.
enum class AmcMode { fixed_I, fixed_II, fixed_III, auto_from_antecedent };

struct RunoffConfig {
  double ia_ratio = 0.2;  // initial abstraction as a fraction of retention
  AmcMode amc_mode = AmcMode::fixed_II;
  double amc_dry_threshold_mm = 35.6;  // 5-day rain below this: class I
  double amc_wet_threshold_mm = 53.3;  // 5-day rain above this: class III
};

inline double weighted_cn(std::span<const LandUseParcel> parcels) {
  if (parcels.empty())
    throw std::invalid_argument("weighted_cn: no parcels");
  double area_sum = 0.0, weighted = 0.0;
  for (const auto& p : parcels) {
    if (!(p.area > 0.0) || !std::isfinite(p.area))
      throw std::invalid_argument("weighted_cn: parcel '" + p.label +
                                  "' needs area > 0");
    if (!(p.cn > 0.0) || !(p.cn <= 100.0))
      throw std::invalid_argument("weighted_cn: parcel '" + p.label +
                                  "' needs cn in (0, 100]");
    area_sum += p.area;
    weighted += p.area * p.cn;
  }
  return weighted / area_sum;
}

// Potential maximum retention S in mm. cn = 100 gives exactly 0.
inline double retention(double cn) {
  if (!(cn > 0.0) || !(cn <= 100.0) || !std::isfinite(cn))
    throw std::invalid_argument("retention: cn must be in (0, 100]");
  return 25400.0 / cn - 254.0;
}

// Curve-number runoff depth Q in mm for rainfall p in mm:
//   Q = 0                       for p <= Ia
//   Q = (p - Ia)^2 / (p - Ia + S)  otherwise, Ia = ia_ratio * S.
inline double runoff_depth(double p, double cn, const RunoffConfig& config = {}) {
  if (!(p >= 0.0) || !std::isfinite(p))
    throw std::invalid_argument("runoff_depth: rainfall must be >= 0");
  if (!(config.ia_ratio >= 0.0) || !std::isfinite(config.ia_ratio))
    throw std::invalid_argument("runoff_depth: ia_ratio must be >= 0");
  const double s = retention(cn);
  const double ia = config.ia_ratio * s;
  if (p <= ia) return 0.0;
  const double excess = p - ia;
  const double denom = excess + s;
  if (denom == 0.0) return 0.0;  // p == ia == s == 0
  return excess * excess / denom;
}

// Convert a class-II curve number to the class implied by `mode` (with
// `antecedent_5day_rain_mm` deciding the class in auto mode). Conversions
// clamp to 100.
inline double amc_adjust(double cn2, double antecedent_5day_rain_mm,
                         const RunoffConfig& config = {}) {
  if (!(cn2 > 0.0) || !(cn2 <= 100.0) || !std::isfinite(cn2))
    throw std::invalid_argument("amc_adjust: cn must be in (0, 100]");
  AmcMode mode = config.amc_mode;
  if (mode == AmcMode::auto_from_antecedent) {
    if (!(config.amc_wet_threshold_mm > config.amc_dry_threshold_mm))
      throw ConfigError("amc thresholds: wet must exceed dry");
    if (!(antecedent_5day_rain_mm >= 0.0) ||
        !std::isfinite(antecedent_5day_rain_mm))
      throw std::invalid_argument(
          "amc_adjust: antecedent rainfall must be >= 0");
    if (antecedent_5day_rain_mm < config.amc_dry_threshold_mm)
      mode = AmcMode::fixed_I;
    else if (antecedent_5day_rain_mm > config.amc_wet_threshold_mm)
      mode = AmcMode::fixed_III;
    else
      mode = AmcMode::fixed_II;
  }
  switch (mode) {
    case AmcMode::fixed_I:
      return std::min(100.0, cn2 / (2.281 - 0.01281 * cn2));
    case AmcMode::fixed_II:
      return cn2;
    case AmcMode::fixed_III:
      return std::min(100.0, cn2 / (0.427 + 0.00573 * cn2));
    case AmcMode::auto_from_antecedent:
      break;
  }
  throw std::logic_error("amc_adjust: bad mode");
}

// One day of catchment data: rainfall, a model runoff estimate, and an
// observed runoff, each with a variance. `fused_q` is filled by
// assimilate_runoff.
struct RunoffDay {
  std::string day;
  double rainfall_p = 0.0;
  UncertainScalar model_q;
  UncertainScalar observed_q;
  std::optional<UncertainScalar> fused_q;
};

// Rainfall total over the `window` days preceding `index` (exclusive);
// days before the start of the record contribute nothing. Feeds the AMC
// auto mode.
inline double antecedent_rainfall(std::span<const RunoffDay> days,
                                  std::size_t index, std::size_t window = 5) {
  if (index >= days.size())
    throw std::invalid_argument("antecedent_rainfall: index out of range");
  double sum = 0.0;
  const std::size_t lo = index > window ? index - window : 0;
  for (std::size_t i = lo; i < index; ++i) sum += days[i].rainfall_p;
  return sum;
}

// Inverse-variance fusion of model and observed runoff, day by day.
inline std::vector<RunoffDay> assimilate_runoff(std::span<const RunoffDay> days) {
  std::vector<RunoffDay> out(days.begin(), days.end());
  for (auto& d : out) {
    const FusionResult f = fuse(d.model_q, d.observed_q);
    d.fused_q = f.fused;
  }
  return out;
}

}  // namespace dakit
