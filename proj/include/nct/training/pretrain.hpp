#pragma once

// Base generator pretraining by MMD matching: minimize the V-statistic MMD^2
// under a fixed multi-bandwidth RBF kernel between f_theta(z) batches and
// fresh target samples. The kernel gradient with respect to the generated
// rows is computed in closed form and pushed through the taped MLP.

#include <cmath>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/eval/mmd.hpp"
#include "nct/models/generator.hpp"
#include "nct/numeric/adam.hpp"
#include "nct/training/targets.hpp"

namespace nct {

struct PretrainConfig {
  TargetKind target = TargetKind::eight_gaussians;
  MlpSpec spec{2, {64, 64, 64}, 2, Activation::tanh};
  std::size_t steps = 4000;
  std::size_t batch_size = 256;
  AdamConfig adam{3e-3};
  std::vector<double> bandwidths{0.1, 0.2, 0.5, 1.0, 2.0};
  std::size_t heldout_samples = 2000;
  double threshold = 0.01;
  std::uint64_t seed = 0;
  bool enforce_threshold = true;

  void validate() const {
    spec.validate();
    if (batch_size < 2) throw ConfigError("pretrain.batch_size must be at least 2");
    if (heldout_samples < 2) throw ConfigError("pretrain.heldout_samples must be at least 2");
    if (bandwidths.empty()) throw ConfigError("pretrain.bandwidths must not be empty");
    for (double h : bandwidths) {
      if (!(h > 0.0)) throw ConfigError("pretrain.bandwidths must be positive");
    }
    if (!(threshold > 0.0)) throw ConfigError("pretrain.threshold must be positive");
    if (spec.output_dim != 2) throw ConfigError("pretraining targets are 2-D; output_dim must be 2");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("pretrain.lr must be positive");
  }
};

struct PretrainResult {
  GeneratorModel generator;
  double heldout_mmd2 = 0.0;
  double threshold = 0.0;
  std::size_t steps = 0;
  std::vector<double> losses;
  std::string kernel;
};

/// V-statistic MMD^2 between rows of x and y under an RBF mixture, and its
/// gradient with respect to x.
inline double rbf_mmd2_grad(const Matrix& x, const Matrix& y, const std::vector<double>& bandwidths,
                            Matrix* grad_x) {
  const double n = static_cast<double>(x.rows()), m = static_cast<double>(y.rows());
  const double inv_h = 1.0 / static_cast<double>(bandwidths.size());
  auto sqdist = [](const Matrix& a, const Matrix& b) {
    const Eigen::VectorXd an = a.rowwise().squaredNorm();
    const Eigen::VectorXd bn = b.rowwise().squaredNorm();
    Matrix d = (-2.0 * a * b.transpose()).eval();
    d.colwise() += an;
    d.rowwise() += bn.transpose();
    return d.cwiseMax(0.0).eval();
  };
  const Matrix dxx = sqdist(x, x), dxy = sqdist(x, y), dyy = sqdist(y, y);
  double value = 0.0;
  Matrix wxx = Matrix::Zero(dxx.rows(), dxx.cols());
  Matrix wxy = Matrix::Zero(dxy.rows(), dxy.cols());
  for (double h : bandwidths) {
    const double s = -1.0 / (2.0 * h * h);
    // Exponents below -60 are clamped: the kernel is ~1e-26 there and the
    // clamp keeps subnormals out of the arithmetic.
    const Matrix kxx = (dxx * s).array().max(-60.0).exp().matrix();
    const Matrix kxy = (dxy * s).array().max(-60.0).exp().matrix();
    const double kyy = (dyy * s).array().max(-60.0).exp().sum();
    value += inv_h * (kxx.sum() / (n * n) + kyy / (m * m) - 2.0 * kxy.sum() / (n * m));
    // d k(a, b) / d a = -k (a - b) / h^2
    wxx += kxx / (h * h);
    wxy += kxy / (h * h);
  }
  if (grad_x) {
    // d/dx_i of sum_j k(x_i, x_j) counted twice by symmetry.
    const Eigen::VectorXd rxx = wxx.rowwise().sum();
    const Eigen::VectorXd rxy = wxy.rowwise().sum();
    Matrix gxx = -(rxx.asDiagonal() * x - wxx * x);
    Matrix gxy = -(rxy.asDiagonal() * x - wxy * y);
    *grad_x = inv_h * (2.0 / (n * n) * gxx - 2.0 / (n * m) * gxy);
  }
  return value;
}

/// Held-out MMD^2 under the evaluation kernel (median-heuristic RBF mixture).
inline double heldout_mmd2(const GeneratorModel& gen, TargetKind target, std::size_t n,
                           std::uint64_t seed, std::string* kernel_desc = nullptr) {
  RngStream rng = RngStream(seed).derive("pretrain-heldout");
  const Matrix z = rng.normal_matrix(static_cast<Eigen::Index>(n),
                                     static_cast<Eigen::Index>(gen.latent_dim()));
  const Matrix x = generate_batch(gen, z);
  const Matrix y = sample_target(target, n, rng);
  const KernelSpec k = resolve_kernel(KernelSpec{}, x, y);
  if (kernel_desc) *kernel_desc = k.describe();
  return mmd2_vstat(x, y, k);
}

inline PretrainResult pretrain_generator(const PretrainConfig& cfg) {
  cfg.validate();
  RngStream rng = RngStream(cfg.seed).derive("pretrain");
  RngStream init = rng.derive("init");
  PretrainResult res;
  res.generator = make_generator(cfg.spec, init);
  res.threshold = cfg.threshold;
  AdamState adam(cfg.adam, res.generator.theta.size());
  const auto B = static_cast<Eigen::Index>(cfg.batch_size);
  const auto m = static_cast<Eigen::Index>(cfg.spec.input_dim);

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    const Matrix z = rng.normal_matrix(B, m);
    const Matrix y = sample_target(cfg.target, cfg.batch_size, rng);
    Tape tape(res.generator.theta);
    const MlpVars vars = bind_mlp(tape, res.generator.theta, cfg.spec, "", true);
    Var x = mlp_forward(vars, cfg.spec, tape.constant(z));
    Matrix gx;
    const double loss = rbf_mmd2_grad(x.value(), y, cfg.bandwidths, &gx);
    if (!std::isfinite(loss)) {
      throw TrainingError("pretraining diverged at step " + std::to_string(step));
    }
    res.losses.push_back(loss);
    adam.apply(res.generator.theta, tape.backward(x, gx));
  }
  res.steps = cfg.steps;
  res.heldout_mmd2 = heldout_mmd2(res.generator, cfg.target, cfg.heldout_samples, cfg.seed,
                                  &res.kernel);
  if (cfg.enforce_threshold && !(res.heldout_mmd2 < cfg.threshold)) {
    throw PretrainFailed("held-out MMD^2 " + std::to_string(res.heldout_mmd2) +
                         " did not reach the threshold " + std::to_string(cfg.threshold) +
                         " after " + std::to_string(cfg.steps) + " steps");
  }
  return res;
}

}  // namespace nct
