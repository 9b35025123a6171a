#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "nct/error.hpp"
#include "nct/numeric/tape.hpp"
#include "nct/rng.hpp"

namespace nct {

enum class TargetKind { eight_gaussians, two_moons, checkerboard };

inline std::string to_string(TargetKind t) {
  switch (t) {
    case TargetKind::eight_gaussians: return "eight-gaussians";
    case TargetKind::two_moons: return "two-moons";
    case TargetKind::checkerboard: return "checkerboard";
  }
  return "?";
}

inline TargetKind parse_target(std::string_view s) {
  if (s == "eight-gaussians") return TargetKind::eight_gaussians;
  if (s == "two-moons") return TargetKind::two_moons;
  if (s == "checkerboard") return TargetKind::checkerboard;
  throw ConfigError("unknown target distribution '" + std::string(s) + "'");
}

inline constexpr double kEightGaussiansRadius = 2.0;
inline constexpr double kEightGaussiansStd = 0.2;

/// Mode centers sit at angles (2j+1) pi/8, two per quadrant, none on an axis.
inline std::pair<double, double> eight_gaussians_center(int j) {
  const double angle = (2 * j + 1) * std::numbers::pi / 8.0;
  return {kEightGaussiansRadius * std::cos(angle), kEightGaussiansRadius * std::sin(angle)};
}

/// Draws n samples of an analytic 2-D target.
inline Matrix sample_target(TargetKind kind, std::size_t n, RngStream& rng) {
  Matrix out(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    switch (kind) {
      case TargetKind::eight_gaussians: {
        const auto [cx, cy] = eight_gaussians_center(static_cast<int>(rng.index(8)));
        out(i, 0) = cx + kEightGaussiansStd * rng.normal();
        out(i, 1) = cy + kEightGaussiansStd * rng.normal();
        break;
      }
      case TargetKind::two_moons: {
        const double t = std::numbers::pi * rng.uniform();
        double x, y;
        if (rng.bernoulli(0.5)) {
          x = std::cos(t);
          y = std::sin(t);
        } else {
          x = 1.0 - std::cos(t);
          y = 0.5 - std::sin(t);
        }
        out(i, 0) = 1.5 * (x - 0.5) + 0.1 * rng.normal();
        out(i, 1) = 1.5 * (y - 0.25) + 0.1 * rng.normal();
        break;
      }
      case TargetKind::checkerboard: {
        const double x = rng.uniform(-2.0, 2.0);
        const double y = rng.uniform(0.0, 1.0) - 2.0 * static_cast<double>(rng.index(2));
        out(i, 0) = x;
        out(i, 1) = y + static_cast<double>(static_cast<long>(std::floor(x)) & 1);
        break;
      }
    }
  }
  return out;
}

}  // namespace nct
