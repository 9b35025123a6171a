#pragma once

#include <algorithm>

#include "nct/training/config.hpp"

namespace nct {

/// Lagrange multiplier for the boundary constraint plus an exponentially
/// smoothed estimate of the signal that drives it.
struct DualState {
  double lambda = 1.0;
  double smoothed = 0.0;
  bool seeded = false;

  /// Folds one raw batch loss into the running estimate (first call seeds it).
  void observe(double raw, double factor) {
    smoothed = seeded ? factor * smoothed + (1.0 - factor) * raw : raw;
    seeded = true;
  }
};

/// Projected ascent: lambda' = max(lambda + eta (signal - xi), 0).
inline DualState dual_step(DualState ds, double signal, const NctConfig& cfg) {
  ds.lambda = std::max(ds.lambda + cfg.eta * (signal - cfg.xi), 0.0);
  return ds;
}

}  // namespace nct
