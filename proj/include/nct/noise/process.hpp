#pragma once

#include <string>
#include <utility>
#include <vector>

#include "nct/error.hpp"
#include "nct/models/condition.hpp"
#include "nct/models/generator.hpp"
#include "nct/noise/schedule.hpp"
#include "nct/rng.hpp"

namespace nct {

inline void check_level(std::size_t k, const NoiseSchedule& sched, std::size_t max_k) {
  if (k > max_k) {
    throw IndexError("noise level index " + std::to_string(k) + " outside [0, " +
                     std::to_string(max_k) + "] for a schedule with N=" +
                     std::to_string(sched.intervals));
  }
}

/// z_{t_k} = alpha_k z + sigma_k eps.
inline std::vector<double> diffuse(const std::vector<double>& z, const std::vector<double>& eps,
                                   std::size_t k, const NoiseSchedule& sched) {
  check_level(k, sched, sched.intervals);
  if (z.size() != eps.size()) throw ConfigError("diffuse: latent and noise lengths differ");
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = sched.alpha[k] * z[i] + sched.sigma[k] * eps[i];
  return out;
}

inline Matrix diffuse_batch(const Matrix& z, const Matrix& eps, std::size_t k,
                            const NoiseSchedule& sched) {
  check_level(k, sched, sched.intervals);
  if (z.rows() != eps.rows() || z.cols() != eps.cols()) {
    throw ConfigError("diffuse: latent and noise shapes differ");
  }
  return sched.alpha[k] * z + sched.sigma[k] * eps;
}

/// (z_{t_{k+1}}, z_{t_k}) built from the same (z, eps).
inline std::pair<std::vector<double>, std::vector<double>> adjacent_pair(
    const std::vector<double>& z, const std::vector<double>& eps, std::size_t k,
    const NoiseSchedule& sched) {
  check_level(k, sched, sched.intervals - 1);
  return {diffuse(z, eps, k + 1, sched), diffuse(z, eps, k, sched)};
}

inline std::pair<Matrix, Matrix> adjacent_pair_batch(const Matrix& z, const Matrix& eps,
                                                     std::size_t k, const NoiseSchedule& sched) {
  check_level(k, sched, sched.intervals - 1);
  return {diffuse_batch(z, eps, k + 1, sched), diffuse_batch(z, eps, k, sched)};
}

struct LatentBatch {
  Matrix z;
  Matrix eps;
  std::uint64_t seed = 0;
};

inline LatentBatch sample_latents(std::size_t n, std::size_t dim, RngStream& rng) {
  LatentBatch b;
  b.seed = rng.seed();
  b.z = rng.normal_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  b.eps = rng.normal_matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  return b;
}

/// Rows (z_i, x_i = f_theta(z_i), c_i ~ p(c | x_i)); `cembed` is the
/// adapter-ready embedding of c.
struct CoupledBatch {
  Matrix z;
  Matrix x;
  Matrix c;
  Matrix cembed;

  Eigen::Index size() const { return z.rows(); }
};

inline CoupledBatch couple(const GeneratorModel& gen, const ConditionModel& cm, Matrix z,
                           RngStream& rng) {
  CoupledBatch b;
  b.x = generate_batch(gen, z);
  b.c = extract_conditions(cm, b.x, rng);
  b.cembed = embed_conditions(cm, b.c);
  b.z = std::move(z);
  return b;
}

inline CoupledBatch sample_coupled(const GeneratorModel& gen, const ConditionModel& cm,
                                   std::size_t n, RngStream& rng) {
  Matrix z = rng.normal_matrix(static_cast<Eigen::Index>(n),
                               static_cast<Eigen::Index>(gen.latent_dim()));
  return couple(gen, cm, std::move(z), rng);
}

}  // namespace nct
