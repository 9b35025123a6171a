#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/numeric/parameter_vector.hpp"

namespace nct {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW); zero at desk scale
};

/// Bias-corrected Adam moments for one parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, std::size_t n)
      : config_(config), m_(n, 0.0), v_(n, 0.0) {}

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  std::uint64_t step() const { return step_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

  /// Applies one update in place.
  void apply(ParameterVector& params, const ParameterVector& grads) {
    if (params.size() != grads.size() || params.size() != m_.size()) {
      throw ConfigError("adam: parameter, gradient and state lengths differ (" +
                        std::to_string(params.size()) + ", " + std::to_string(grads.size()) +
                        ", " + std::to_string(m_.size()) + ")");
    }
    if (const auto bad = grads.first_non_finite(); bad < grads.size()) {
      throw TrainingError("adam: non-finite gradient at coordinate " + std::to_string(bad) +
                          " (value " + std::to_string(grads[bad]) + ") on step " +
                          std::to_string(step_ + 1));
    }
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    auto p = params.values();
    auto g = grads.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * g[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      p[i] -= config_.learning_rate * (mhat / (std::sqrt(vhat) + config_.epsilon) +
                                       config_.weight_decay * p[i]);
    }
  }

 private:
  AdamConfig config_;
  std::vector<double> m_, v_;
  std::uint64_t step_ = 0;
};

inline void adam_step(AdamState& state, ParameterVector& params, const ParameterVector& grads) {
  state.apply(params, grads);
}

}  // namespace nct
