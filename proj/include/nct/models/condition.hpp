#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/numeric/tape.hpp"
#include "nct/rng.hpp"

namespace nct {

/// Discrete structural label, lossy quantization, and a noisy scalar cue.
enum class ConditionKind { quadrant_label, coarse_grid, noisy_projection };

inline std::string to_string(ConditionKind k) {
  switch (k) {
    case ConditionKind::quadrant_label: return "quadrant-label";
    case ConditionKind::coarse_grid: return "coarse-grid";
    case ConditionKind::noisy_projection: return "noisy-projection";
  }
  return "?";
}

inline ConditionKind parse_condition_kind(std::string_view s) {
  if (s == "quadrant-label") return ConditionKind::quadrant_label;
  if (s == "coarse-grid") return ConditionKind::coarse_grid;
  if (s == "noisy-projection") return ConditionKind::noisy_projection;
  throw ConfigError("unknown condition kind '" + std::string(s) + "'");
}

inline constexpr std::size_t kQuadrantLabels = 4;

/// Quadrant index from coordinate signs: 0 (+,+), 1 (-,+), 2 (-,-), 3 (+,-).
/// A coordinate that is exactly zero counts as positive.
inline int quadrant_of(double x, double y) {
  const bool xneg = x < 0.0;
  const bool yneg = y < 0.0;
  if (!xneg && !yneg) return 0;
  if (xneg && !yneg) return 1;
  if (xneg && yneg) return 2;
  return 3;
}

/// p(c|x): a deterministic extractor h(x) plus optional label flips or
/// additive Gaussian noise.
struct ConditionModel {
  ConditionKind kind = ConditionKind::quadrant_label;
  std::size_t data_dim = 2;
  double grid_cell = 1.0;
  std::vector<double> projection{1.0, 0.0};
  double noise_scale = 0.0;
  double flip_prob = 0.0;

  /// Columns of a raw condition row.
  std::size_t condition_dim() const {
    return kind == ConditionKind::coarse_grid ? data_dim : 1;
  }
  /// Columns of an embedded condition row fed to the adapter.
  std::size_t embedding_dim() const {
    switch (kind) {
      case ConditionKind::quadrant_label: return kQuadrantLabels;
      case ConditionKind::coarse_grid: return data_dim;
      case ConditionKind::noisy_projection: return 1;
    }
    return 0;
  }
  bool is_label() const { return kind == ConditionKind::quadrant_label; }
  bool deterministic() const { return flip_prob == 0.0 && noise_scale == 0.0; }

  /// The extractor h(.) alone: same kind, no flips, no noise.
  ConditionModel extractor() const {
    ConditionModel h = *this;
    h.flip_prob = 0.0;
    h.noise_scale = 0.0;
    return h;
  }

  void validate() const {
    if (data_dim == 0) throw ConfigError("condition model: data_dim must be positive");
    if (kind == ConditionKind::quadrant_label && data_dim < 2) {
      throw ConfigError("quadrant labels need at least two data dimensions");
    }
    if (kind == ConditionKind::coarse_grid && !(grid_cell > 0.0)) {
      throw ConfigError("coarse-grid cell size must be positive");
    }
    if (kind == ConditionKind::noisy_projection && projection.size() != data_dim) {
      throw ConfigError("projection vector length must equal data_dim");
    }
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip_prob must lie in [0, 1]");
    if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be nonnegative");
  }

  bool operator==(const ConditionModel&) const = default;
};

namespace detail {

inline std::vector<double> extract_row(const ConditionModel& cm, const double* x, RngStream& rng) {
  switch (cm.kind) {
    case ConditionKind::quadrant_label: {
      int label = quadrant_of(x[0], x[1]);
      if (cm.flip_prob > 0.0 && rng.bernoulli(cm.flip_prob)) {
        label = static_cast<int>((label + 1 + rng.index(kQuadrantLabels - 1)) % kQuadrantLabels);
      }
      return {static_cast<double>(label)};
    }
    case ConditionKind::coarse_grid: {
      std::vector<double> c(cm.data_dim);
      for (std::size_t i = 0; i < cm.data_dim; ++i) {
        c[i] = (std::floor(x[i] / cm.grid_cell) + 0.5) * cm.grid_cell;
      }
      return c;
    }
    case ConditionKind::noisy_projection: {
      double v = 0.0;
      for (std::size_t i = 0; i < cm.data_dim; ++i) v += cm.projection[i] * x[i];
      if (cm.noise_scale > 0.0) v += cm.noise_scale * rng.normal();
      return {v};
    }
  }
  return {};
}

}  // namespace detail

/// Draws c ~ p(c|x). Total: never fails for a finite x of the right length.
inline std::vector<double> extract_condition(const ConditionModel& cm, const std::vector<double>& x,
                                             RngStream& rng) {
  if (x.size() != cm.data_dim) {
    throw ConfigError("extract_condition: sample has length " + std::to_string(x.size()) +
                      ", expected " + std::to_string(cm.data_dim));
  }
  return detail::extract_row(cm, x.data(), rng);
}

inline Matrix extract_conditions(const ConditionModel& cm, const Matrix& xs, RngStream& rng) {
  if (static_cast<std::size_t>(xs.cols()) != cm.data_dim) {
    throw ConfigError("extract_conditions: sample width does not match data_dim");
  }
  Matrix out(xs.rows(), static_cast<Eigen::Index>(cm.condition_dim()));
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const auto c = detail::extract_row(cm, xs.row(i).data(), rng);
    for (std::size_t j = 0; j < c.size(); ++j) out(i, static_cast<Eigen::Index>(j)) = c[j];
  }
  return out;
}

inline int label_of(double raw) {
  const long v = std::lround(raw);
  if (v < 0 || v >= static_cast<long>(kQuadrantLabels) || static_cast<double>(v) != raw) {
    throw ConfigError("invalid quadrant label " + std::to_string(raw));
  }
  return static_cast<int>(v);
}

/// Labels become one-hot rows; continuous conditions pass through unchanged.
inline std::vector<double> embed_condition(const ConditionModel& cm, const std::vector<double>& c) {
  if (c.size() != cm.condition_dim()) throw ConfigError("embed_condition: wrong condition length");
  if (cm.is_label()) {
    std::vector<double> e(kQuadrantLabels, 0.0);
    e[static_cast<std::size_t>(label_of(c[0]))] = 1.0;
    return e;
  }
  return c;
}

inline Matrix embed_conditions(const ConditionModel& cm, const Matrix& cs) {
  if (static_cast<std::size_t>(cs.cols()) != cm.condition_dim()) {
    throw ConfigError("embed_conditions: wrong condition width");
  }
  if (!cm.is_label()) return cs;
  Matrix e = Matrix::Zero(cs.rows(), static_cast<Eigen::Index>(kQuadrantLabels));
  for (Eigen::Index i = 0; i < cs.rows(); ++i) e(i, label_of(cs(i, 0))) = 1.0;
  return e;
}

}  // namespace nct
