#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/models/adapter.hpp"
#include "nct/models/condition.hpp"
#include "nct/noise/process.hpp"

namespace nct {

/// One computed statistic.
struct MetricsRow {
  std::string name;
  double value = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::string kernel;
  std::uint64_t seed = 0;
};

struct ConsistencyResult {
  double l1 = 0.0;
  double mismatch_rate = 0.0;
  std::size_t n = 0;
};

/// Mean ||h(x) - c||_1 with labels compared as one-hot rows (0 on a match, 2
/// on a mismatch), plus the fraction of rows where h(x) != c. Uses the
/// deterministic extractor of `cm` whatever its noise settings.
inline ConsistencyResult consistency_metric(const Matrix& samples, const Matrix& conditions,
                                            const ConditionModel& cm) {
  if (samples.rows() != conditions.rows()) {
    throw ConfigError("consistency_metric: " + std::to_string(samples.rows()) + " samples vs " +
                      std::to_string(conditions.rows()) + " conditions");
  }
  if (samples.rows() == 0) throw ConfigError("consistency_metric: empty batch");
  const ConditionModel h = cm.extractor();
  RngStream unused(0);
  const Matrix hx = extract_conditions(h, samples, unused);
  const Matrix a = embed_conditions(h, hx);
  const Matrix b = embed_conditions(h, conditions);
  ConsistencyResult r;
  r.n = static_cast<std::size_t>(samples.rows());
  std::size_t mismatches = 0;
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    l1 += (a.row(i) - b.row(i)).cwiseAbs().sum();
    mismatches += (hx.row(i).array() != conditions.row(i).array()).any() ? 1 : 0;
  }
  r.l1 = l1 / static_cast<double>(r.n);
  r.mismatch_rate = static_cast<double>(mismatches) / static_cast<double>(r.n);
  return r;
}

/// Binomial standard error of a rate estimated from n trials.
inline double rate_standard_error(double rate, std::size_t n) {
  return std::sqrt(std::max(rate * (1.0 - rate), 0.0) / static_cast<double>(n));
}

struct ChanceRate {
  double rate = 0.0;
  double standard_error = 0.0;
  std::vector<double> label_probs;
};

/// Mismatch rate of a sampler that ignores its condition, for labels drawn
/// from p(c) = the label marginal of the generator: 1 - sum_c p(c)^2, with
/// p(c) estimated from n generator samples.
inline ChanceRate chance_mismatch_rate(const GeneratorModel& gen, const ConditionModel& cm,
                                       std::size_t n, RngStream rng) {
  if (!cm.is_label()) throw ConfigError("chance rate is defined for label conditions only");
  const CoupledBatch b = sample_coupled(gen, cm, n, rng);
  ChanceRate r;
  r.label_probs.assign(kQuadrantLabels, 0.0);
  const ConditionModel h = cm.extractor();
  RngStream unused(0);
  const Matrix hx = extract_conditions(h, b.x, unused);
  for (Eigen::Index i = 0; i < hx.rows(); ++i) r.label_probs[static_cast<std::size_t>(label_of(hx(i, 0)))] += 1.0;
  double sq = 0.0;
  for (double& p : r.label_probs) {
    p /= static_cast<double>(n);
    sq += p * p;
  }
  r.rate = 1.0 - sq;
  // Delta method: d/dp_c (1 - sum p^2) = -2 p_c.
  double m2 = 0.0, m1 = 0.0;
  for (double p : r.label_probs) {
    m1 += p * 2.0 * p;
    m2 += p * 4.0 * p * p;
  }
  r.standard_error = std::sqrt(std::max(m2 - m1 * m1, 0.0) / static_cast<double>(n));
  return r;
}

/// Samples with conditions drawn independently of the latents: z ~ N(0, I)
/// and c ~ p(c), taken from a separate batch of coupled pairs.
struct IndependentBatch {
  Matrix z;
  Matrix c;
  Matrix cembed;
};

inline IndependentBatch sample_independent(const GeneratorModel& gen, const ConditionModel& cm,
                                           std::size_t n, RngStream& rng) {
  IndependentBatch b;
  const CoupledBatch other = sample_coupled(gen, cm, n, rng);
  b.c = other.c;
  b.cembed = other.cembed;
  b.z = rng.normal_matrix(static_cast<Eigen::Index>(n),
                          static_cast<Eigen::Index>(gen.latent_dim()));
  return b;
}

/// Per-coordinate variance summed over coordinates.
inline double total_variance(const Matrix& x) {
  if (x.rows() < 2) throw ConfigError("total_variance needs at least two rows");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).squaredNorm() / static_cast<double>(x.rows() - 1);
}

}  // namespace nct
