#pragma once

#include <vector>

#include "nct/numeric/mlp.hpp"
#include "nct/numeric/parameter_vector.hpp"
#include "nct/rng.hpp"

namespace nct {

/// The frozen one-step generator f_theta: latent (m) -> data (n).
struct GeneratorModel {
  MlpSpec spec;
  ParameterVector theta;

  std::size_t latent_dim() const { return spec.input_dim; }
  std::size_t data_dim() const { return spec.output_dim; }
};

inline GeneratorModel make_generator(const MlpSpec& spec) {
  return GeneratorModel{spec, ParameterVector(mlp_layout(spec))};
}

inline GeneratorModel make_generator(const MlpSpec& spec, RngStream& rng) {
  GeneratorModel g = make_generator(spec);
  init_mlp(g.theta, spec, "", rng);
  return g;
}

inline std::vector<double> generate(const GeneratorModel& gen, const std::vector<double>& z) {
  return mlp_forward(gen.theta, gen.spec, z);
}

inline Matrix generate_batch(const GeneratorModel& gen, const Matrix& z) {
  return mlp_forward_batch(gen.theta, gen.spec, z);
}

}  // namespace nct
