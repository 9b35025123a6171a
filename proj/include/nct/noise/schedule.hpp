#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nct/error.hpp"

namespace nct {

enum class ScheduleKind { linear_sigma };

inline std::string to_string(ScheduleKind) { return "linear-sigma"; }

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "linear-sigma") return ScheduleKind::linear_sigma;
  throw ConfigError("unknown schedule kind '" + std::string(s) + "'");
}

/// Grid 0 = t_0 < ... < t_N = 1 with noise levels sigma_k and signal
/// coefficients alpha_k = sqrt(1 - sigma_k^2), so alpha^2 + sigma^2 = 1.
struct NoiseSchedule {
  std::size_t intervals = 0;
  ScheduleKind kind = ScheduleKind::linear_sigma;
  std::vector<double> sigma;
  std::vector<double> alpha;

  std::size_t size() const { return intervals; }

  bool operator==(const NoiseSchedule&) const = default;
};

inline NoiseSchedule make_schedule(std::size_t intervals,
                                   ScheduleKind kind = ScheduleKind::linear_sigma) {
  if (intervals == 0) throw ConfigError("noise schedule needs at least one interval");
  NoiseSchedule s;
  s.intervals = intervals;
  s.kind = kind;
  s.sigma.resize(intervals + 1);
  s.alpha.resize(intervals + 1);
  for (std::size_t k = 0; k <= intervals; ++k) {
    const double sig = static_cast<double>(k) / static_cast<double>(intervals);
    s.sigma[k] = sig;
    s.alpha[k] = std::sqrt(1.0 - sig * sig);
  }
  // exact endpoints
  s.sigma.front() = 0.0;
  s.alpha.front() = 1.0;
  s.sigma.back() = 1.0;
  s.alpha.back() = 0.0;
  return s;
}

}  // namespace nct
