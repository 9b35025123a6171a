#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "nct/numeric/parameter_vector.hpp"

namespace nct {

using ScalarLoss = std::function<double(const ParameterVector&)>;

/// Central differences, one coordinate at a time. Independent of the tape;
/// this is the reference every reverse-mode gradient is checked against.
inline ParameterVector finite_diff_grad(const ScalarLoss& loss, const ParameterVector& params,
                                        double h = 1e-5) {
  ParameterVector grad = params.zeros_like();
  ParameterVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double x = params[i];
    probe[i] = x + h;
    const double up = loss(probe);
    probe[i] = x - h;
    const double down = loss(probe);
    probe[i] = x;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// |a - b| / max(|a|, |b|, floor), worst coordinate. The floor keeps exactly
/// zero gradients from turning rounding noise into huge relative errors.
inline double max_relative_error(const ParameterVector& a, const ParameterVector& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace nct
