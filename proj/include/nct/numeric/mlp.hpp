#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/numeric/parameter_vector.hpp"
#include "nct/numeric/tape.hpp"
#include "nct/rng.hpp"

namespace nct {

enum class Activation { tanh, smooth_rectifier };

inline std::string to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "smooth-rectifier";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "smooth-rectifier" || s == "softplus") return Activation::smooth_rectifier;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct MlpSpec {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 2;
  Activation activation = Activation::tanh;

  std::size_t layer_count() const { return hidden_dims.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden_dims[l - 1]; }
  std::size_t layer_out(std::size_t l) const {
    return l == hidden_dims.size() ? output_dim : hidden_dims[l];
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) n += (layer_in(l) + 1) * layer_out(l);
    return n;
  }

  void validate() const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("MLP dimensions must be positive");
    for (auto h : hidden_dims) {
      if (h == 0) throw ConfigError("MLP hidden widths must be positive");
    }
  }

  bool operator==(const MlpSpec&) const = default;
};

inline std::string weight_name(const std::string& prefix, std::size_t l) {
  return prefix + "layer" + std::to_string(l) + ".weight";
}
inline std::string bias_name(const std::string& prefix, std::size_t l) {
  return prefix + "layer" + std::to_string(l) + ".bias";
}

/// Weight {out, in} then bias {out} for every layer, in order.
inline Layout mlp_layout(const MlpSpec& spec, const std::string& prefix = "") {
  spec.validate();
  Layout layout;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    layout.push_back({weight_name(prefix, l), {spec.layer_out(l), spec.layer_in(l)}});
    layout.push_back({bias_name(prefix, l), {spec.layer_out(l)}});
  }
  return layout;
}

/// Glorot-uniform weights and zero biases for the MLP under `prefix`.
inline void init_mlp(ParameterVector& params, const MlpSpec& spec, const std::string& prefix,
                     RngStream& rng) {
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double fan = static_cast<double>(spec.layer_in(l) + spec.layer_out(l));
    const double limit = std::sqrt(6.0 / fan);
    for (double& w : params.segment(weight_name(prefix, l))) w = rng.uniform(-limit, limit);
    for (double& b : params.segment(bias_name(prefix, l))) b = 0.0;
  }
}

inline void activate_inplace(Matrix& m, Activation a) {
  if (a == Activation::tanh) {
    m = m.array().tanh().matrix();
  } else {
    m = ad::softplus_matrix(m);
  }
}

inline Var activate(Var v, Activation a) {
  return a == Activation::tanh ? ad::tanh(v) : ad::softplus(v);
}

inline void check_mlp_params(const ParameterVector& params, const MlpSpec& spec,
                             const std::string& prefix) {
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto& w = params.layout().at(params.segment_index(weight_name(prefix, l)));
    if (w.rows() != spec.layer_out(l) || w.cols() != spec.layer_in(l)) {
      throw ConfigError("parameter layout does not match MLP spec at layer " +
                        std::to_string(l));
    }
  }
}

/// Batched forward pass without a tape: rows of `x` are inputs.
inline Matrix mlp_forward_batch(const ParameterVector& params, const MlpSpec& spec,
                                const Matrix& x, const std::string& prefix = "") {
  if (static_cast<std::size_t>(x.cols()) != spec.input_dim) {
    throw ConfigError("MLP input has " + std::to_string(x.cols()) + " columns, expected " +
                      std::to_string(spec.input_dim));
  }
  check_mlp_params(params, spec, prefix);
  Matrix h = x;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto w = segment_matrix(params, params.segment_index(weight_name(prefix, l)));
    const auto b = segment_matrix(params, params.segment_index(bias_name(prefix, l)));
    h = ad::affine_value(h, w, b);
    if (l + 1 < spec.layer_count()) activate_inplace(h, spec.activation);
  }
  return h;
}

inline std::vector<double> mlp_forward(const ParameterVector& params, const MlpSpec& spec,
                                       const std::vector<double>& input,
                                       const std::string& prefix = "") {
  if (input.size() != spec.input_dim) {
    throw ConfigError("MLP input has length " + std::to_string(input.size()) + ", expected " +
                      std::to_string(spec.input_dim));
  }
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
  const Matrix y = mlp_forward_batch(params, spec, x, prefix);
  return std::vector<double>(y.data(), y.data() + y.size());
}

/// MLP weights placed on a tape, either as trainable leaves of the watched
/// vector or as constants.
struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

inline MlpVars bind_mlp(Tape& tape, const ParameterVector& params, const MlpSpec& spec,
                        const std::string& prefix, bool trainable) {
  check_mlp_params(params, spec, prefix);
  MlpVars vars;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const auto wi = params.segment_index(weight_name(prefix, l));
    const auto bi = params.segment_index(bias_name(prefix, l));
    if (trainable) {
      vars.weights.push_back(tape.parameter(wi));
      vars.biases.push_back(tape.parameter(bi));
    } else {
      vars.weights.push_back(tape.constant(segment_matrix(params, wi)));
      vars.biases.push_back(tape.constant(segment_matrix(params, bi)));
    }
  }
  return vars;
}

inline Var mlp_forward(const MlpVars& vars, const MlpSpec& spec, Var x) {
  Var h = x;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    h = ad::affine(h, vars.weights[l], vars.biases[l]);
    if (l + 1 < spec.layer_count()) h = activate(h, spec.activation);
  }
  return h;
}

}  // namespace nct
