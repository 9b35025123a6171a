#pragma once

#include <cstdint>
#include <string>

#include "nct/error.hpp"
#include "nct/models/adapter.hpp"
#include "nct/noise/schedule.hpp"
#include "nct/numeric/adam.hpp"
#include "nct/training/distance.hpp"

namespace nct {

/// Which loss drives the dual ascent. `constraint` uses L_bound, the
/// constrained quantity; `consistency` feeds L_con into the same update.
enum class DualSignal { constraint, consistency };

inline std::string to_string(DualSignal s) {
  return s == DualSignal::constraint ? "constraint" : "consistency";
}

inline DualSignal parse_dual_signal(std::string_view s) {
  if (s == "constraint") return DualSignal::constraint;
  if (s == "consistency") return DualSignal::consistency;
  throw ConfigError("unknown dual_signal '" + std::string(s) + "'");
}

/// Whether the stop-gradient target uses the live adapter or its EMA.
enum class TargetBranch { live, ema };

inline std::string to_string(TargetBranch t) { return t == TargetBranch::live ? "live" : "ema"; }

inline TargetBranch parse_target_branch(std::string_view s) {
  if (s == "live") return TargetBranch::live;
  if (s == "ema") return TargetBranch::ema;
  throw ConfigError("unknown target branch '" + std::string(s) + "'");
}

struct NctConfig {
  double xi = 1e-3;
  double eta = 0.01;
  double lambda0 = 1.0;
  std::size_t particles = 1;
  std::size_t intervals = 16;
  ScheduleKind schedule_kind = ScheduleKind::linear_sigma;
  std::size_t batch_size = 256;
  AdamConfig adam{1e-3, 0.9, 0.95, 1e-8, 0.0};
  std::size_t total_steps = 10000;
  DistanceMetric distance;
  DualSignal dual_signal = DualSignal::constraint;
  double signal_smoothing = 0.9;
  double ema_decay = 0.999;
  TargetBranch target = TargetBranch::live;
  std::uint64_t seed = 0;
  AdapterOptions adapter;

  // Ablation switches. With use_dual = false lambda stays at lambda0.
  bool use_consistency = true;
  bool use_boundary = true;
  bool use_dual = true;

  /// Steps with lambda == 0 before an early-stopping event is logged.
  std::size_t early_stop_window = 500;

  void validate() const {
    if (!(xi > 0.0)) throw ConfigError("xi must be positive");
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(lambda0 >= 0.0)) throw ConfigError("lambda0 must be nonnegative");
    if (particles == 0) throw ConfigError("particle count must be at least 1");
    if (intervals == 0) throw ConfigError("schedule needs N >= 1");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(signal_smoothing >= 0.0 && signal_smoothing < 1.0)) {
      throw ConfigError("signal smoothing must lie in [0, 1)");
    }
    if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("EMA decay must lie in [0, 1)");
    distance.validate();
  }
};

}  // namespace nct
