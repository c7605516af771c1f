#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>

#include "dakit/errors.hpp"
#include "dakit/ode.hpp"

namespace dakit {

// Lorenz system:
//   x' = a1 (y - x)
//   y' = a2 x - y - x z
//   z' = x y - a3 z
// Defaults are the classic chaotic parameter set.
struct LorenzParams {
  double a1 = 10.0;
  double a2 = 28.0;
  double a3 = 8.0 / 3.0;
};

inline std::array<double, 3> lorenz_rhs(const std::array<double, 3>& state,
                                        const LorenzParams& params = {}) {
  const double x = state[0], y = state[1], z = state[2];
  return {params.a1 * (y - x), params.a2 * x - y - x * z, x * y - params.a3 * z};
}

inline OdeSystem lorenz_system(const LorenzParams& params = {}) {
  OdeSystem sys;
  sys.dimension = 3;
  sys.rhs = [params](double, std::span<const double> s, std::span<double> d) {
    const auto out = lorenz_rhs({s[0], s[1], s[2]}, params);
    d[0] = out[0];
    d[1] = out[1];
    d[2] = out[2];
  };
  return sys;
}

// systems addressable by name from config files
inline const std::map<std::string, std::function<OdeSystem()>>& system_registry() {
  static const std::map<std::string, std::function<OdeSystem()>> registry{
      {"lorenz63", [] { return lorenz_system(); }},
  };
  return registry;
}

inline OdeSystem make_system(const std::string& name) {
  const auto& reg = system_registry();
  const auto it = reg.find(name);
  if (it == reg.end()) {
    std::string known;
    for (const auto& [key, _] : reg) {
      if (!known.empty()) known += ", ";
      known += key;
    }
    throw ConfigError("unknown model '" + name + "' (known: " + known + ")");
  }
  return it->second();
}

}  // namespace dakit
