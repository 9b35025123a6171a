#pragma once

// Primal-dual noise consistency training.
//
// Each step: sample z, eps ~ N(0, I), x = f_theta(z), c ~ p(c|x), a level
// k ~ U{0..N-1}; take one Adam step on L_con + lambda L_bound in phi; then
// lambda <- max(lambda + eta (signal - xi), 0) on the smoothed signal.

#include <chrono>
#include <cmath>
#include <string>

#include "nct/models/adapter.hpp"
#include "nct/models/ema.hpp"
#include "nct/noise/process.hpp"
#include "nct/numeric/adam.hpp"
#include "nct/training/config.hpp"
#include "nct/training/dual.hpp"
#include "nct/training/losses.hpp"
#include "nct/training/train_log.hpp"

namespace nct {

struct ObjectiveTerms {
  double l_con = 0.0;
  double l_bound = 0.0;
  ParameterVector g_con;
  ParameterVector g_bound;
};

/// L_con and L_bound with separate gradients. Both live on one tape; their
/// graphs only share parameter leaves, so two sweeps cost one combined sweep.
inline ObjectiveTerms objective_terms(const GeneratorModel& gen, const AdapterModel& ad,
                                      const CoupledBatch& batch, const Matrix& eps, std::size_t k,
                                      const NoiseSchedule& sched, const NctConfig& cfg,
                                      const ParameterVector* target_phi = nullptr) {
  check_level(k, sched, sched.intervals - 1);
  AdapterTape at(gen, ad);
  Var con = consistency_loss(at, batch, eps, k + 1, k, sched, cfg.distance, cfg.particles,
                             target_phi);
  Var bound = boundary_loss(at, batch, cfg.distance);
  ObjectiveTerms t;
  t.l_con = con.value()(0, 0);
  t.l_bound = bound.value()(0, 0);
  if (!std::isfinite(t.l_con) || !std::isfinite(t.l_bound)) {
    throw TrainingError("non-finite loss (L_con=" + std::to_string(t.l_con) +
                        ", L_bound=" + std::to_string(t.l_bound) + ") at level k=" +
                        std::to_string(k));
  }
  t.g_con = at.tape().backward(con);
  t.g_bound = at.tape().backward(bound);
  return t;
}

/// Gradient of the Lagrangian L_con + lambda L_bound honoring the ablation switches.
inline ParameterVector lagrangian_gradient(const ObjectiveTerms& t, double lambda,
                                           const NctConfig& cfg) {
  ParameterVector g = t.g_con.zeros_like();
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (cfg.use_consistency ? t.g_con[i] : 0.0) +
           (cfg.use_boundary ? lambda * t.g_bound[i] : 0.0);
  }
  return g;
}

struct PrimalStepResult {
  double l_con = 0.0;
  double l_bound = 0.0;
  double grad_norm_con = 0.0;
  double grad_norm_bound = 0.0;
};

/// One optimizer step on L_con + lambda L_bound with respect to phi only.
inline PrimalStepResult primal_step(AdapterModel& ad, AdamState& adam, double lambda,
                                    const GeneratorModel& gen, const CoupledBatch& batch,
                                    const Matrix& eps, std::size_t k, const NoiseSchedule& sched,
                                    const NctConfig& cfg,
                                    const ParameterVector* target_phi = nullptr) {
  const ObjectiveTerms t = objective_terms(gen, ad, batch, eps, k, sched, cfg, target_phi);
  adam.apply(ad.phi, lagrangian_gradient(t, lambda, cfg));
  return {t.l_con, t.l_bound, t.g_con.norm(), t.g_bound.norm()};
}

struct TrainResult {
  AdapterModel adapter;
  EmaState ema;
  TrainLog log;
  DualState dual;
  NoiseSchedule schedule;
};

inline AdapterModel initial_adapter(const GeneratorModel& gen, const ConditionModel& cm,
                                    const NctConfig& cfg) {
  RngStream init = RngStream(cfg.seed).derive("adapter-init");
  return make_adapter(make_adapter_spec(gen, cm, cfg.adapter), init);
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

inline TrainResult nct_train(const GeneratorModel& gen, const ConditionModel& cm,
                             const NctConfig& cfg) {
  cfg.validate();
  cm.validate();
  RngStream rng = RngStream(cfg.seed).derive("adapter");
  TrainResult res{initial_adapter(gen, cm, cfg), {}, {}, {}, make_schedule(cfg.intervals, cfg.schedule_kind)};
  res.ema = make_ema(res.adapter.phi, cfg.ema_decay);
  res.dual.lambda = cfg.lambda0;
  AdamState adam(cfg.adam, res.adapter.phi.size());

  const auto B = cfg.batch_size;
  const auto m = static_cast<Eigen::Index>(gen.latent_dim());
  const auto start = std::chrono::steady_clock::now();
  std::size_t zero_lambda_run = 0;
  bool early_stop_logged = false;

  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    const CoupledBatch batch = sample_coupled(gen, cm, B, rng);
    const Matrix eps = rng.normal_matrix(static_cast<Eigen::Index>(B * cfg.particles), m);
    const std::size_t k = rng.index(cfg.intervals);

    PrimalStepResult r;
    try {
      r = primal_step(res.adapter, adam, res.dual.lambda, gen, batch, eps, k, res.schedule, cfg,
                      cfg.target == TargetBranch::ema ? &res.ema.shadow : nullptr);
    } catch (const TrainingError& e) {
      throw TrainingError("diverged at step " + std::to_string(step) + ": " + e.what());
    }

    if (cfg.use_dual) {
      res.dual.observe(cfg.dual_signal == DualSignal::constraint ? r.l_bound : r.l_con,
                       cfg.signal_smoothing);
      res.dual = dual_step(res.dual, res.dual.smoothed, cfg);
    }
    ema_update(res.ema, res.adapter.phi);

    res.log.append({step, r.l_con, r.l_bound, res.dual.lambda, r.grad_norm_con,
                    r.grad_norm_bound, elapsed_ms(start)});

    zero_lambda_run = res.dual.lambda == 0.0 ? zero_lambda_run + 1 : 0;
    if (!early_stop_logged && cfg.use_dual && zero_lambda_run >= cfg.early_stop_window) {
      res.log.events.push_back("step " + std::to_string(step) + ": lambda held at 0 for " +
                               std::to_string(cfg.early_stop_window) +
                               " steps (early-stopping condition)");
      early_stop_logged = true;
    }
  }
  return res;
}

}  // namespace nct
