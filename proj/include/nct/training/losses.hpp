#pragma once

// Noise consistency loss and boundary loss as taped scalars.
//
// Consistency, one particle:   mean_i d(f(z_{k+1,i}, c_i), sg(f(z_{k,i}, c_i)))
// with both latents built from the same (z_i, eps_i). With P particles per
// row the pair is replaced by two particle clouds A (noisier, trainable) and
// B (target, detached) and the loss is half the V-statistic MMD^2 under the
// kernel -d:
//
//   mean d(A_p, B_q) - mean d(A_p, A_q) / 2 - mean d(B_p, B_q) / 2
//
// which equals the one-particle loss when P = 1.
//
// Boundary:  mean_i d(f(z_i, c_i), f_theta(z_i)), target fixed.

#include <optional>
#include <vector>

#include "nct/models/adapter.hpp"
#include "nct/noise/process.hpp"
#include "nct/numeric/tape.hpp"
#include "nct/training/distance.hpp"

namespace nct {

/// A tape watching an adapter's phi with the frozen generator bound as
/// constants. The adapter must outlive it.
class AdapterTape {
 public:
  AdapterTape(const GeneratorModel& gen, const AdapterModel& ad)
      : gen_(&gen), spec_(&ad.spec), tape_(ad.phi) {
    check_adapter_fits(gen, ad.spec);
    base_ = bind_mlp(tape_, gen.theta, gen.spec, "", false);
    live_ = bind_adapter(tape_, ad.spec, ad.phi, true);
  }

  Tape& tape() { return tape_; }

  Var forward(const Matrix& z, const Matrix& cembed) {
    return conditional_forward(*gen_, base_, *spec_, live_, tape_.constant(z),
                               tape_.constant(cembed));
  }

  /// Forward pass with a different, frozen parameter vector (e.g. EMA weights).
  Var forward_frozen(const ParameterVector& phi, const Matrix& z, const Matrix& cembed) {
    if (!frozen_ || frozen_source_ != &phi) {
      frozen_ = bind_adapter(tape_, *spec_, phi, false);
      frozen_source_ = &phi;
    }
    return conditional_forward(*gen_, base_, *spec_, *frozen_, tape_.constant(z),
                               tape_.constant(cembed));
  }

 private:
  const GeneratorModel* gen_;
  const AdapterSpec* spec_;
  Tape tape_;
  MlpVars base_;
  AdapterVars live_;
  std::optional<AdapterVars> frozen_;
  const ParameterVector* frozen_source_ = nullptr;
};

inline Matrix repeat_rows(const Matrix& m, std::size_t times) {
  if (times == 1) return m;
  Matrix out(m.rows() * static_cast<Eigen::Index>(times), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (std::size_t p = 0; p < times; ++p) {
      out.row(i * static_cast<Eigen::Index>(times) + static_cast<Eigen::Index>(p)) = m.row(i);
    }
  }
  return out;
}

/// Consistency loss between levels k_noisy (trainable branch) and k_target
/// (stop-gradient branch). `eps` has batch * particles rows, grouped by row.
/// With `target_phi` set, the target branch runs on those weights instead.
inline Var consistency_loss(AdapterTape& at, const CoupledBatch& batch, const Matrix& eps,
                            std::size_t k_noisy, std::size_t k_target, const NoiseSchedule& sched,
                            const DistanceMetric& metric, std::size_t particles,
                            const ParameterVector* target_phi = nullptr) {
  if (particles == 0) throw ConfigError("particle count must be at least 1");
  check_level(k_noisy, sched, sched.intervals);
  check_level(k_target, sched, sched.intervals);
  const Eigen::Index rows = batch.size();
  const auto P = static_cast<Eigen::Index>(particles);
  if (eps.rows() != rows * P || eps.cols() != batch.z.cols()) {
    throw ConfigError("consistency loss: noise batch must have batch*particles rows");
  }
  const Matrix z = repeat_rows(batch.z, particles);
  const Matrix ce = repeat_rows(batch.cembed, particles);
  const Matrix z_noisy = diffuse_batch(z, eps, k_noisy, sched);
  const Matrix z_target = diffuse_batch(z, eps, k_target, sched);

  Tape& tape = at.tape();
  Var a = at.forward(z_noisy, ce);
  Var b = tape.detach(target_phi ? at.forward_frozen(*target_phi, z_target, ce)
                                 : at.forward(z_target, ce));
  if (particles == 1) return ad::mean(distance_rows(a, b, metric));

  std::vector<Eigen::Index> left, right;
  left.reserve(static_cast<std::size_t>(rows * P * P));
  right.reserve(left.capacity());
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index p = 0; p < P; ++p) {
      for (Eigen::Index q = 0; q < P; ++q) {
        left.push_back(i * P + p);
        right.push_back(i * P + q);
      }
    }
  }
  Var cross = ad::mean(distance_rows(ad::gather_rows(a, left), ad::gather_rows(b, right), metric));
  Var self_a = ad::mean(distance_rows(ad::gather_rows(a, left), ad::gather_rows(a, right), metric));
  double self_b = 0.0;
  {
    const Matrix& bv = b.value();
    for (std::size_t r = 0; r < left.size(); ++r) {
      self_b += distance_from_sq((bv.row(left[r]) - bv.row(right[r])).squaredNorm(), metric);
    }
    self_b /= static_cast<double>(left.size());
  }
  return ad::add_scalar(ad::sub(cross, ad::scale(self_a, 0.5)), -0.5 * self_b);
}

inline Var boundary_loss(AdapterTape& at, const CoupledBatch& batch, const DistanceMetric& metric) {
  Var out = at.forward(batch.z, batch.cembed);
  Var target = at.tape().constant(batch.x);
  return ad::mean(distance_rows(out, target, metric));
}

struct LossGrad {
  double value = 0.0;
  ParameterVector grad;
};

/// Adjacent-level consistency loss (k+1 against k) with its gradient in phi.
inline LossGrad noise_consistency_loss_grad(const GeneratorModel& gen, const AdapterModel& ad,
                                            const CoupledBatch& batch, const Matrix& eps,
                                            std::size_t k, const NoiseSchedule& sched,
                                            const DistanceMetric& metric, std::size_t particles) {
  check_level(k, sched, sched.intervals - 1);
  AdapterTape at(gen, ad);
  Var loss = consistency_loss(at, batch, eps, k + 1, k, sched, metric, particles);
  return {loss.value()(0, 0), at.tape().backward(loss)};
}

inline double noise_consistency_loss(const GeneratorModel& gen, const AdapterModel& ad,
                                     const CoupledBatch& batch, const Matrix& eps, std::size_t k,
                                     const NoiseSchedule& sched, const DistanceMetric& metric,
                                     std::size_t particles) {
  check_level(k, sched, sched.intervals - 1);
  AdapterTape at(gen, ad);
  return consistency_loss(at, batch, eps, k + 1, k, sched, metric, particles).value()(0, 0);
}

inline LossGrad boundary_loss_grad(const GeneratorModel& gen, const AdapterModel& ad,
                                   const CoupledBatch& batch, const DistanceMetric& metric) {
  AdapterTape at(gen, ad);
  Var loss = boundary_loss(at, batch, metric);
  return {loss.value()(0, 0), at.tape().backward(loss)};
}

inline double boundary_loss_value(const GeneratorModel& gen, const AdapterModel& ad,
                                  const CoupledBatch& batch, const DistanceMetric& metric) {
  const Matrix out = generate_conditional_batch(gen, ad, batch.z, batch.cembed);
  return distance_rows(out, batch.x, metric).mean();
}

}  // namespace nct
