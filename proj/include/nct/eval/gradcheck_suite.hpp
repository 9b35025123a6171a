#pragma once

// Reverse-mode versus central-difference checks for the training objectives
// on a small random generator and a randomly perturbed adapter (a zero-init
// adapter would leave most gradient entries exactly zero).

#include <string>
#include <vector>

#include "nct/eval/gradcheck.hpp"
#include "nct/training/nct.hpp"

namespace nct {

struct GradCheckCase {
  std::string objective;  // consistency | boundary | lagrangian
  DistanceMetric distance;
  std::size_t particles = 1;
  std::uint64_t seed = 0;
  GradCheckResult result;
};

struct GradCheckOptions {
  MlpSpec generator{2, {8}, 2, Activation::smooth_rectifier};
  AdapterOptions adapter{{4}, 3, {8}};
  ConditionModel condition{};
  std::size_t batch = 6;
  std::size_t intervals = 16;
  double lambda = 0.7;
  double h = 1e-5;
  double floor = 1e-6;
  double phi_scale = 0.3;
};

/// Runs the three objectives for one seed, one distance and one particle count.
inline std::vector<GradCheckCase> gradcheck_objectives(std::uint64_t seed, const DistanceMetric& metric,
                                                       std::size_t particles,
                                                       const GradCheckOptions& opt = {}) {
  RngStream rng = RngStream(seed).derive("gradcheck");
  RngStream init = rng.derive("init");
  const GeneratorModel gen = make_generator(opt.generator, init);
  ConditionModel cm = opt.condition;
  cm.data_dim = gen.data_dim();
  AdapterModel ad = make_adapter(make_adapter_spec(gen, cm, opt.adapter), init);
  for (std::size_t i = 0; i < ad.phi.size(); ++i) ad.phi[i] += opt.phi_scale * init.normal();

  const CoupledBatch batch = sample_coupled(gen, cm, opt.batch, rng);
  const Matrix eps = rng.normal_matrix(static_cast<Eigen::Index>(opt.batch * particles),
                                       static_cast<Eigen::Index>(gen.latent_dim()));
  const std::size_t k = rng.index(opt.intervals);
  const NoiseSchedule sched = make_schedule(opt.intervals);
  // The stop-gradient branch is pinned to the weights at the check point, so
  // the finite-difference loss sees exactly what the gradient treats as constant.
  const ParameterVector phi0 = ad.phi;

  NctConfig cfg;
  cfg.distance = metric;
  cfg.particles = particles;

  auto with_phi = [&](const ParameterVector& phi) {
    AdapterModel a = ad;
    a.phi = phi;
    return a;
  };
  auto con_value = [&](const ParameterVector& phi) {
    const AdapterModel a = with_phi(phi);
    AdapterTape at(gen, a);
    return consistency_loss(at, batch, eps, k + 1, k, sched, metric, particles, &phi0).value()(0, 0);
  };
  auto bound_value = [&](const ParameterVector& phi) {
    const AdapterModel a = with_phi(phi);
    AdapterTape at(gen, a);
    return boundary_loss(at, batch, metric).value()(0, 0);
  };
  auto terms = [&](const ParameterVector& phi) {
    return objective_terms(gen, with_phi(phi), batch, eps, k, sched, cfg, &phi0);
  };

  std::vector<GradCheckCase> out;
  auto add = [&](std::string name, const ScalarLoss& loss, const GradientFn& grad) {
    out.push_back({std::move(name), metric, particles, seed, grad_check(loss, grad, ad.phi, opt.h, opt.floor)});
  };
  add("consistency", con_value, [&](const ParameterVector& phi) { return terms(phi).g_con; });
  add("boundary", bound_value, [&](const ParameterVector& phi) { return terms(phi).g_bound; });
  add(
      "lagrangian",
      [&](const ParameterVector& phi) { return con_value(phi) + opt.lambda * bound_value(phi); },
      [&](const ParameterVector& phi) { return lagrangian_gradient(terms(phi), opt.lambda, cfg); });
  return out;
}

}  // namespace nct
