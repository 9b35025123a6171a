#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/numeric/tape.hpp"

namespace nct {

enum class DistanceKind { squared_l2, pseudo_huber };

inline std::string to_string(DistanceKind k) {
  return k == DistanceKind::squared_l2 ? "squared-l2" : "pseudo-huber";
}

inline DistanceKind parse_distance_kind(std::string_view s) {
  if (s == "squared-l2") return DistanceKind::squared_l2;
  if (s == "pseudo-huber") return DistanceKind::pseudo_huber;
  throw ConfigError("unknown distance '" + std::string(s) + "'");
}

/// d(a, b): ||a-b||^2, or sqrt(||a-b||^2 + c^2) - c. The kernel k = -d is the
/// one the multi-particle consistency loss uses.
struct DistanceMetric {
  DistanceKind kind = DistanceKind::squared_l2;
  double huber_c = 0.1;

  void validate() const {
    if (kind == DistanceKind::pseudo_huber && !(huber_c > 0.0)) {
      throw ConfigError("pseudo-huber constant must be positive");
    }
  }

  bool operator==(const DistanceMetric&) const = default;
};

inline double distance_from_sq(double sq, const DistanceMetric& m) {
  return m.kind == DistanceKind::squared_l2 ? sq
                                            : std::sqrt(sq + m.huber_c * m.huber_c) - m.huber_c;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b,
                       const DistanceMetric& m) {
  if (a.size() != b.size()) throw ConfigError("distance: length mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return distance_from_sq(sq, m);
}

/// Row-wise distance between two B x n vars -> B x 1.
inline Var distance_rows(Var a, Var b, const DistanceMetric& m) {
  Var sq = ad::row_sum(ad::square(ad::sub(a, b)));
  if (m.kind == DistanceKind::squared_l2) return sq;
  return ad::add_scalar(ad::sqrt(ad::add_scalar(sq, m.huber_c * m.huber_c)), -m.huber_c);
}

/// Row-wise distance on plain matrices.
inline Eigen::VectorXd distance_rows(const Matrix& a, const Matrix& b, const DistanceMetric& m) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("distance: shape mismatch");
  Eigen::VectorXd d(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) d(i) = distance_from_sq((a.row(i) - b.row(i)).squaredNorm(), m);
  return d;
}

}  // namespace nct
