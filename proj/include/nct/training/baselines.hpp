#pragma once

// The two naive ways of adding a condition to a one-step generator.
//
// naive:   min d(f(z, c), x) with x = f_theta(z'), c ~ p(c|x) and z drawn
//          independently of z'. The optimum is E[x | c]: a mean collapse.
// coupled: min d(f(z, c), f_theta(z)) on coupled pairs only. Zero-init is
//          already optimal, so the adapter never learns to use c.
//
// Both log their loss in the l_bound column.

#include <chrono>

#include "nct/training/nct.hpp"

namespace nct {

enum class BaselineMode { naive, coupled };

inline std::string to_string(BaselineMode m) { return m == BaselineMode::naive ? "naive" : "coupled"; }

inline BaselineMode parse_baseline_mode(std::string_view s) {
  if (s == "naive") return BaselineMode::naive;
  if (s == "coupled") return BaselineMode::coupled;
  throw ConfigError("unknown baseline mode '" + std::string(s) + "'");
}

inline TrainResult train_baseline(const GeneratorModel& gen, const ConditionModel& cm,
                                  const NctConfig& cfg, BaselineMode mode) {
  cfg.validate();
  cm.validate();
  RngStream rng = RngStream(cfg.seed).derive(mode == BaselineMode::naive ? "baseline-naive"
                                                                           : "baseline-coupled");
  TrainResult res{initial_adapter(gen, cm, cfg), {}, {}, {}, make_schedule(cfg.intervals, cfg.schedule_kind)};
  res.ema = make_ema(res.adapter.phi, cfg.ema_decay);
  res.dual.lambda = 0.0;
  AdamState adam(cfg.adam, res.adapter.phi.size());
  const auto start = std::chrono::steady_clock::now();
  const auto m = static_cast<Eigen::Index>(gen.latent_dim());

  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    CoupledBatch batch = sample_coupled(gen, cm, cfg.batch_size, rng);
    if (mode == BaselineMode::naive) {
      batch.z = rng.normal_matrix(static_cast<Eigen::Index>(cfg.batch_size), m);
    }
    AdapterTape at(gen, res.adapter);
    Var loss = boundary_loss(at, batch, cfg.distance);
    const double value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw TrainingError("baseline diverged at step " + std::to_string(step));
    }
    const ParameterVector g = at.tape().backward(loss);
    adam.apply(res.adapter.phi, g);
    ema_update(res.ema, res.adapter.phi);
    res.log.append({step, 0.0, value, 0.0, 0.0, g.norm(), elapsed_ms(start)});
  }
  return res;
}

inline TrainResult baseline_naive(const GeneratorModel& gen, const ConditionModel& cm,
                                  const NctConfig& cfg) {
  return train_baseline(gen, cm, cfg, BaselineMode::naive);
}

inline TrainResult baseline_coupled(const GeneratorModel& gen, const ConditionModel& cm,
                                    const NctConfig& cfg) {
  return train_baseline(gen, cm, cfg, BaselineMode::coupled);
}

}  // namespace nct
