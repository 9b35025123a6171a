#pragma once

#include <algorithm>

#include "nct/error.hpp"
#include "nct/numeric/parameter_vector.hpp"

namespace nct {

/// Exponential moving average of adapter weights, used for evaluation.
struct EmaState {
  ParameterVector shadow;
  double decay = 0.999;
};

inline EmaState make_ema(const ParameterVector& phi, double decay) {
  if (!(decay >= 0.0 && decay < 1.0)) throw ConfigError("EMA decay must lie in [0, 1)");
  return EmaState{phi, decay};
}

inline void ema_update(EmaState& ema, const ParameterVector& phi) {
  if (!ema.shadow.same_layout(phi)) throw ConfigError("EMA layout does not match parameters");
  const double d = ema.decay;
  auto s = ema.shadow.values();
  auto p = phi.values();
  // s + (1-d)(p - s) leaves s untouched when s == p; the clamp keeps rounding
  // from stepping outside [min(s, p), max(s, p)].
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double next = s[i] + (1.0 - d) * (p[i] - s[i]);
    s[i] = std::clamp(next, std::min(s[i], p[i]), std::max(s[i], p[i]));
  }
}

}  // namespace nct
