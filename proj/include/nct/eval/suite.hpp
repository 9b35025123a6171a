#pragma once

// The full metric suite for one adapter: condition consistency on random
// (z, c), boundary behaviour on coupled pairs, the marginal match to p_theta,
// and per-condition comparisons against the rejection oracle.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nct/eval/metrics.hpp"
#include "nct/eval/mmd.hpp"
#include "nct/eval/oracle.hpp"
#include "nct/models/adapter.hpp"
#include "nct/noise/process.hpp"

namespace nct {

struct SuiteOptions {
  std::size_t samples = 4000;
  std::size_t oracle_samples = 2000;
  std::size_t permutations = 200;
  std::size_t chance_samples = 20000;
  std::size_t conditions = 4;  // continuous kinds: how many reference conditions to probe
  std::vector<double> median_multipliers{0.5, 1.0, 2.0};
  OracleOptions oracle{};
  bool run_oracle = true;
};

struct ConditionProbe {
  std::string name;  // "label=2" or "c=1"
  std::vector<double> condition;
  bool feasible = false;
  std::string infeasible_reason;
  double mmd2 = std::numeric_limits<double>::quiet_NaN();
  double null_q99 = std::numeric_limits<double>::quiet_NaN();
  double p_value = std::numeric_limits<double>::quiet_NaN();
  double adapter_variance = std::numeric_limits<double>::quiet_NaN();
  double oracle_variance = std::numeric_limits<double>::quiet_NaN();
  double acceptance_rate = 0.0;
  std::string kernel;
};

struct EvalReport {
  ConsistencyResult random_pairs;
  double mismatch_se = 0.0;
  bool has_chance = false;
  ChanceRate chance;
  ConsistencyResult boundary_pairs;
  double boundary_loss = 0.0;
  double marginal_mmd2 = 0.0;
  std::string marginal_kernel;
  std::vector<ConditionProbe> probes;
  std::vector<MetricsRow> rows;
};

namespace suite_detail {

inline std::vector<ConditionProbe> pick_conditions(const GeneratorModel& gen, const ConditionModel& cm,
                                                   const SuiteOptions& opt, RngStream rng) {
  std::vector<ConditionProbe> out;
  if (cm.is_label()) {
    for (std::size_t l = 0; l < kQuadrantLabels; ++l) {
      ConditionProbe p;
      p.name = "label=" + std::to_string(l);
      p.condition = {static_cast<double>(l)};
      out.push_back(std::move(p));
    }
    return out;
  }
  // Reference conditions are extracted from generator samples, so each has
  // positive probability under p(c).
  const CoupledBatch b = sample_coupled(gen, cm.extractor(), opt.conditions, rng);
  for (Eigen::Index i = 0; i < b.c.rows(); ++i) {
    ConditionProbe p;
    p.name = "c=" + std::to_string(i);
    p.condition.resize(static_cast<std::size_t>(b.c.cols()));
    for (Eigen::Index j = 0; j < b.c.cols(); ++j) p.condition[static_cast<std::size_t>(j)] = b.c(i, j);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace suite_detail

/// Evaluates `phi` (any parameter vector with the adapter layout, usually the
/// EMA shadow). Every random draw comes from substreams of `rng`.
inline EvalReport evaluate_adapter(const GeneratorModel& gen, const AdapterModel& ad,
                                   const ConditionModel& cm, const SuiteOptions& opt, RngStream rng,
                                   std::uint64_t seed_tag) {
  EvalReport rep;
  KernelSpec base;
  base.median_multipliers = opt.median_multipliers;
  auto row = [&](std::string name, double value, std::size_t na, std::size_t nb, std::string kernel = "") {
    rep.rows.push_back({std::move(name), value, na, nb, std::move(kernel), seed_tag});
  };

  // Random (z, c): condition consistency of the adapter's outputs.
  {
    RngStream r = rng.derive("random-pairs");
    const IndependentBatch b = sample_independent(gen, cm, opt.samples, r);
    const Matrix out = generate_conditional_batch(gen, ad, b.z, b.cembed);
    rep.random_pairs = consistency_metric(out, b.c, cm);
    rep.mismatch_se = rate_standard_error(rep.random_pairs.mismatch_rate, opt.samples);
    row("mismatch_rate", rep.random_pairs.mismatch_rate, opt.samples, 0);
    row("mismatch_rate_se", rep.mismatch_se, opt.samples, 0);
    row("consistency_l1", rep.random_pairs.l1, opt.samples, 0);

    // Marginal of the adapter outputs against unconditional generator samples.
    RngStream r2 = rng.derive("marginal");
    const Matrix zb = r2.normal_matrix(static_cast<Eigen::Index>(opt.samples),
                                       static_cast<Eigen::Index>(gen.latent_dim()));
    const Matrix base_x = generate_batch(gen, zb);
    const KernelSpec k = resolve_kernel(base, out, base_x);
    rep.marginal_mmd2 = mmd2_vstat(out, base_x, k);
    rep.marginal_kernel = k.describe();
    row("marginal_mmd2", rep.marginal_mmd2, opt.samples, opt.samples, rep.marginal_kernel);
  }

  if (cm.is_label()) {
    rep.has_chance = true;
    rep.chance = chance_mismatch_rate(gen, cm, opt.chance_samples, rng.derive("chance"));
    row("chance_rate", rep.chance.rate, opt.chance_samples, 0);
    row("chance_rate_se", rep.chance.standard_error, opt.chance_samples, 0);
  }

  // Coupled pairs (z, c(f(z))): the adapter should reproduce f(z).
  {
    RngStream r = rng.derive("coupled-pairs");
    const CoupledBatch b = sample_coupled(gen, cm, opt.samples, r);
    const Matrix out = generate_conditional_batch(gen, ad, b.z, b.cembed);
    rep.boundary_pairs = consistency_metric(out, b.c, cm);
    rep.boundary_loss = (out - b.x).rowwise().squaredNorm().mean();
    row("boundary_mismatch_rate", rep.boundary_pairs.mismatch_rate, opt.samples, 0);
    row("boundary_sq_error", rep.boundary_loss, opt.samples, 0);
  }

  if (!opt.run_oracle) return rep;
  rep.probes = suite_detail::pick_conditions(gen, cm, opt, rng.derive("probe-conditions"));
  for (std::size_t j = 0; j < rep.probes.size(); ++j) {
    ConditionProbe& p = rep.probes[j];
    RngStream r = rng.derive("oracle-" + std::to_string(j));
    OracleSamples oracle;
    try {
      oracle = conditional_oracle(gen, cm, p.condition, opt.oracle_samples, r, opt.oracle);
    } catch (const OracleInfeasible& e) {
      p.infeasible_reason = e.what();
      row("oracle_infeasible[" + p.name + "]", 1.0, opt.oracle_samples, 0);
      continue;
    }
    p.feasible = true;
    p.acceptance_rate = oracle.acceptance_rate();
    RngStream rz = rng.derive("adapter-" + std::to_string(j));
    const Matrix z = rz.normal_matrix(static_cast<Eigen::Index>(opt.oracle_samples),
                                      static_cast<Eigen::Index>(gen.latent_dim()));
    Matrix c(z.rows(), static_cast<Eigen::Index>(p.condition.size()));
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index k = 0; k < c.cols(); ++k) c(i, k) = p.condition[static_cast<std::size_t>(k)];
    }
    const Matrix out = generate_conditional_batch(gen, ad, z, embed_conditions(cm, c));
    const PermutationResult t = mmd_permutation_test(out, oracle.samples.samples, base, opt.permutations,
                                                     rng.derive("permutation-" + std::to_string(j)));
    p.mmd2 = t.statistic;
    p.null_q99 = t.null_q99;
    p.p_value = t.p_value;
    p.kernel = t.kernel.describe();
    p.adapter_variance = total_variance(out);
    p.oracle_variance = total_variance(oracle.samples.samples);
    const std::size_t n = opt.oracle_samples;
    row("oracle_mmd2[" + p.name + "]", p.mmd2, n, n, p.kernel);
    row("oracle_null_q99[" + p.name + "]", p.null_q99, n, n, p.kernel);
    row("oracle_p_value[" + p.name + "]", p.p_value, n, n, p.kernel);
    row("adapter_variance[" + p.name + "]", p.adapter_variance, n, 0);
    row("oracle_variance[" + p.name + "]", p.oracle_variance, n, 0);
    row("oracle_acceptance[" + p.name + "]", p.acceptance_rate, oracle.draws, 0);
  }
  return rep;
}

}  // namespace nct
