#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "nct/numeric/finite_diff.hpp"

namespace nct {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::string worst_segment;
  double analytic = 0.0;
  double numeric = 0.0;
};

using GradientFn = std::function<ParameterVector(const ParameterVector&)>;

/// Compares an analytic gradient against central differences of `loss` and
/// reports the worst coordinate.
inline GradCheckResult grad_check(const ScalarLoss& loss, const GradientFn& gradient,
                                  const ParameterVector& params, double h = 1e-5,
                                  double floor = 1e-6) {
  const ParameterVector a = gradient(params);
  const ParameterVector b = finite_diff_grad(loss, params, h);
  GradCheckResult r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    const double err = std::abs(a[i] - b[i]) / scale;
    if (i == 0 || err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.analytic = a[i];
      r.numeric = b[i];
    }
  }
  for (std::size_t s = 0; s < params.layout().size(); ++s) {
    const std::size_t off = params.offset(s);
    if (r.worst_index >= off && r.worst_index < off + params.layout()[s].size()) {
      r.worst_segment = params.layout()[s].name;
    }
  }
  return r;
}

}  // namespace nct
