#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "nct/error.hpp"
#include "nct/eval/mmd.hpp"
#include "nct/models/condition.hpp"
#include "nct/models/generator.hpp"

namespace nct {

struct OracleOptions {
  /// Acceptance tolerance for continuous conditions; negative picks the
  /// per-kind default (half a grid cell, or 0.1 for projections).
  double tolerance = -1.0;
  std::size_t max_draws = 2'000'000;
  std::size_t chunk = 4096;
};

inline double oracle_tolerance(const ConditionModel& cm, const OracleOptions& opt) {
  if (opt.tolerance >= 0.0) return opt.tolerance;
  switch (cm.kind) {
    case ConditionKind::quadrant_label: return 0.0;
    case ConditionKind::coarse_grid: return cm.grid_cell / 2.0;
    case ConditionKind::noisy_projection: return 0.1;
  }
  return 0.0;
}

struct OracleSamples {
  EmpiricalDistribution samples;
  std::size_t draws = 0;
  double tolerance = 0.0;

  double acceptance_rate() const {
    return draws == 0 ? 0.0 : static_cast<double>(samples.size()) / static_cast<double>(draws);
  }
};

/// Rejection sampler for p_theta(x | c): draw z, x = f_theta(z),
/// c' ~ p(c | x), keep x when c' matches c. Labels must match exactly;
/// continuous conditions match when every coordinate is within the tolerance
/// (a tolerance of g/2 on grid-cell centers is an exact cell match).
inline OracleSamples conditional_oracle(const GeneratorModel& gen, const ConditionModel& cm,
                                        const std::vector<double>& c, std::size_t n,
                                        RngStream& rng, const OracleOptions& opt = {}) {
  cm.validate();
  if (c.size() != cm.condition_dim()) throw ConfigError("conditional_oracle: wrong condition length");
  if (n == 0) throw ConfigError("conditional_oracle: n must be positive");
  const double tol = oracle_tolerance(cm, opt);
  const bool exact = cm.is_label();
  Matrix accepted(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(gen.data_dim()));
  std::size_t have = 0, draws = 0;
  while (have < n) {
    if (draws >= opt.max_draws) {
      std::ostringstream os;
      os << "rejection oracle accepted " << have << " of " << n << " samples in " << draws
         << " draws (acceptance rate " << static_cast<double>(have) / static_cast<double>(draws)
         << ")";
      throw OracleInfeasible(os.str());
    }
    const std::size_t m = std::min(opt.chunk, opt.max_draws - draws);
    const Matrix z = rng.normal_matrix(static_cast<Eigen::Index>(m),
                                       static_cast<Eigen::Index>(gen.latent_dim()));
    const Matrix x = generate_batch(gen, z);
    const Matrix cs = extract_conditions(cm, x, rng);
    for (Eigen::Index i = 0; i < cs.rows() && have < n; ++i) {
      ++draws;
      bool ok = true;
      for (Eigen::Index j = 0; j < cs.cols(); ++j) {
        const double diff = std::abs(cs(i, j) - c[static_cast<std::size_t>(j)]);
        ok = ok && (exact ? diff == 0.0 : diff <= tol);
      }
      if (ok) accepted.row(static_cast<Eigen::Index>(have++)) = x.row(i);
    }
  }
  OracleSamples out;
  std::ostringstream tag;
  tag << "oracle(" << to_string(cm.kind) << ", tol=" << tol << ")";
  out.samples = EmpiricalDistribution(std::move(accepted), tag.str());
  out.draws = draws;
  out.tolerance = tol;
  return out;
}

}  // namespace nct
