#pragma once

// Conditional adapter f_{theta,phi}(z, c).
//
// A control branch reads [z | q] where q = cond_mlp(embed(c)). Its l-th
// hidden activation u_l passes through a zero-initialized projection and is
// added to the pre-activation of the base generator's l-th hidden layer:
//
//   u_0 = act(A_0 [z | q] + a_0),   u_l = act(A_l u_{l-1} + a_l)
//   h_{l+1} = act(W_l h_l + b_l + (Z_l u_l + s_l))
//
// With Z_l = 0 and s_l = 0 every correction is exactly zero, so a fresh
// adapter reproduces the base generator bit for bit.

#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/models/condition.hpp"
#include "nct/models/generator.hpp"
#include "nct/numeric/mlp.hpp"

namespace nct {

struct AdapterSpec {
  std::size_t latent_dim = 2;
  std::vector<std::size_t> base_hidden;     // widths of the base net's hidden layers
  MlpSpec cond_spec;                         // embed(c) -> condition features
  std::vector<std::size_t> control_dims;     // one control layer per base hidden layer
  Activation activation = Activation::tanh;

  void validate() const {
    cond_spec.validate();
    if (control_dims.size() != base_hidden.size()) {
      throw ConfigError("adapter needs one control layer per base hidden layer (" +
                        std::to_string(base_hidden.size()) + "), got " +
                        std::to_string(control_dims.size()));
    }
    for (auto d : control_dims) {
      if (d == 0) throw ConfigError("adapter control widths must be positive");
    }
  }

  bool operator==(const AdapterSpec&) const = default;
};

inline const std::string kCondPrefix = "cond.";
inline const std::string kCtrlPrefix = "ctrl.";
inline const std::string kZeroPrefix = "zero.";

inline Layout adapter_layout(const AdapterSpec& spec) {
  spec.validate();
  Layout layout = mlp_layout(spec.cond_spec, kCondPrefix);
  for (std::size_t l = 0; l < spec.control_dims.size(); ++l) {
    const std::size_t in =
        l == 0 ? spec.latent_dim + spec.cond_spec.output_dim : spec.control_dims[l - 1];
    layout.push_back({weight_name(kCtrlPrefix, l), {spec.control_dims[l], in}});
    layout.push_back({bias_name(kCtrlPrefix, l), {spec.control_dims[l]}});
  }
  for (std::size_t l = 0; l < spec.control_dims.size(); ++l) {
    layout.push_back({weight_name(kZeroPrefix, l), {spec.base_hidden[l], spec.control_dims[l]}});
    layout.push_back({bias_name(kZeroPrefix, l), {spec.base_hidden[l]}});
  }
  return layout;
}

struct AdapterModel {
  AdapterSpec spec;
  ParameterVector phi;
};

struct AdapterOptions {
  std::vector<std::size_t> cond_hidden{32};
  std::size_t cond_features = 16;
  std::vector<std::size_t> control_dims;  // empty: copy the base hidden widths
};

inline AdapterSpec make_adapter_spec(const GeneratorModel& gen, const ConditionModel& cm,
                                     const AdapterOptions& opt) {
  AdapterSpec spec;
  spec.latent_dim = gen.latent_dim();
  spec.base_hidden = gen.spec.hidden_dims;
  spec.activation = gen.spec.activation;
  spec.cond_spec = MlpSpec{cm.embedding_dim(), opt.cond_hidden, opt.cond_features,
                           gen.spec.activation};
  spec.control_dims = opt.control_dims.empty() ? gen.spec.hidden_dims : opt.control_dims;
  spec.validate();
  return spec;
}

/// Random control branch, exactly-zero fusion projections.
inline AdapterModel make_adapter(const AdapterSpec& spec, RngStream& rng) {
  AdapterModel ad{spec, ParameterVector(adapter_layout(spec))};
  init_mlp(ad.phi, spec.cond_spec, kCondPrefix, rng);
  for (std::size_t l = 0; l < spec.control_dims.size(); ++l) {
    auto w = ad.phi.segment(weight_name(kCtrlPrefix, l));
    const double fan = static_cast<double>(ad.phi.layout()[ad.phi.segment_index(
                                               weight_name(kCtrlPrefix, l))].cols() +
                                           spec.control_dims[l]);
    const double limit = std::sqrt(6.0 / fan);
    for (double& v : w) v = rng.uniform(-limit, limit);
  }
  return ad;
}

inline void check_adapter_fits(const GeneratorModel& gen, const AdapterSpec& spec) {
  if (spec.latent_dim != gen.latent_dim() || spec.base_hidden != gen.spec.hidden_dims) {
    throw ConfigError("adapter was built for a different generator architecture");
  }
}

/// Batched f_{theta,phi}(z, c) without a tape; `cembed` holds embedded conditions.
inline Matrix generate_conditional_batch(const GeneratorModel& gen, const AdapterSpec& spec,
                                         const ParameterVector& phi, const Matrix& z,
                                         const Matrix& cembed) {
  check_adapter_fits(gen, spec);
  if (z.rows() != cembed.rows()) throw ConfigError("latent and condition batches differ in size");
  if (static_cast<std::size_t>(z.cols()) != spec.latent_dim) {
    throw ConfigError("latent width does not match the generator");
  }
  const Matrix q = mlp_forward_batch(phi, spec.cond_spec, cembed, kCondPrefix);
  Matrix u(z.rows(), z.cols() + q.cols());
  u << z, q;
  Matrix h = z;
  const auto& base = gen.spec;
  for (std::size_t l = 0; l < base.layer_count(); ++l) {
    const auto w = segment_matrix(gen.theta, gen.theta.segment_index(weight_name("", l)));
    const auto b = segment_matrix(gen.theta, gen.theta.segment_index(bias_name("", l)));
    Matrix pre = ad::affine_value(h, w, b);
    if (l + 1 < base.layer_count()) {
      u = ad::affine_value(
          u, segment_matrix(phi, phi.segment_index(weight_name(kCtrlPrefix, l))),
          segment_matrix(phi, phi.segment_index(bias_name(kCtrlPrefix, l))));
      activate_inplace(u, spec.activation);
      pre += ad::affine_value(
          u, segment_matrix(phi, phi.segment_index(weight_name(kZeroPrefix, l))),
          segment_matrix(phi, phi.segment_index(bias_name(kZeroPrefix, l))));
      activate_inplace(pre, base.activation);
    }
    h = std::move(pre);
  }
  return h;
}

inline Matrix generate_conditional_batch(const GeneratorModel& gen, const AdapterModel& ad,
                                         const Matrix& z, const Matrix& cembed) {
  return generate_conditional_batch(gen, ad.spec, ad.phi, z, cembed);
}

inline std::vector<double> generate_conditional(const GeneratorModel& gen, const AdapterModel& ad,
                                                const ConditionModel& cm,
                                                const std::vector<double>& z,
                                                const std::vector<double>& c) {
  if (z.size() != gen.latent_dim()) throw ConfigError("latent has the wrong length");
  const auto e = embed_condition(cm, c);
  if (e.size() != ad.spec.cond_spec.input_dim) {
    throw ConfigError("condition kind does not match the adapter's embedding width");
  }
  Matrix zm(1, static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) zm(0, static_cast<Eigen::Index>(i)) = z[i];
  Matrix em(1, static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i) em(0, static_cast<Eigen::Index>(i)) = e[i];
  const Matrix y = generate_conditional_batch(gen, ad, zm, em);
  return std::vector<double>(y.data(), y.data() + y.size());
}

/// Adapter weights on a tape. Trainable vars are leaves of the tape's watched
/// vector, which must then be `phi` itself.
struct AdapterVars {
  MlpVars cond;
  std::vector<Var> ctrl_w, ctrl_b, zero_w, zero_b;
};

inline AdapterVars bind_adapter(Tape& tape, const AdapterSpec& spec, const ParameterVector& phi,
                                bool trainable) {
  AdapterVars v;
  v.cond = bind_mlp(tape, phi, spec.cond_spec, kCondPrefix, trainable);
  auto bind = [&](const std::string& name) {
    const auto i = phi.segment_index(name);
    return trainable ? tape.parameter(i) : tape.constant(segment_matrix(phi, i));
  };
  for (std::size_t l = 0; l < spec.control_dims.size(); ++l) {
    v.ctrl_w.push_back(bind(weight_name(kCtrlPrefix, l)));
    v.ctrl_b.push_back(bind(bias_name(kCtrlPrefix, l)));
    v.zero_w.push_back(bind(weight_name(kZeroPrefix, l)));
    v.zero_b.push_back(bind(bias_name(kZeroPrefix, l)));
  }
  return v;
}

/// Taped f_{theta,phi}(z, c); `base` carries the frozen generator as constants.
inline Var conditional_forward(const GeneratorModel& gen, const MlpVars& base,
                               const AdapterSpec& spec, const AdapterVars& av, Var z, Var cembed) {
  Var q = mlp_forward(av.cond, spec.cond_spec, cembed);
  Var u = ad::concat_cols(z, q);
  Var h = z;
  const auto& bs = gen.spec;
  for (std::size_t l = 0; l < bs.layer_count(); ++l) {
    Var pre = ad::affine(h, base.weights[l], base.biases[l]);
    if (l + 1 < bs.layer_count()) {
      u = activate(ad::affine(u, av.ctrl_w[l], av.ctrl_b[l]), spec.activation);
      pre = ad::add(pre, ad::affine(u, av.zero_w[l], av.zero_b[l]));
      pre = activate(pre, bs.activation);
    }
    h = pre;
  }
  return h;
}

}  // namespace nct
