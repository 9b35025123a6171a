#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nct {

struct TrainRecord {
  std::uint64_t step = 0;
  double l_con = 0.0;
  double l_bound = 0.0;
  double lambda = 0.0;
  double grad_norm_con = 0.0;
  double grad_norm_bound = 0.0;
  double wall_ms = 0.0;

  /// Everything except wall time, which is the one non-reproducible column.
  bool same_values(const TrainRecord& o) const {
    return step == o.step && l_con == o.l_con && l_bound == o.l_bound && lambda == o.lambda &&
           grad_norm_con == o.grad_norm_con && grad_norm_bound == o.grad_norm_bound;
  }
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::vector<std::string> events;

  void append(const TrainRecord& r) { records.push_back(r); }
  std::size_t size() const { return records.size(); }

  bool same_values(const TrainLog& o) const {
    if (records.size() != o.records.size() || events != o.events) return false;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].same_values(o.records[i])) return false;
    }
    return true;
  }
};

/// Final value of the exponentially smoothed L_bound column (the first record
/// seeds the average), matching the estimate the dual update uses.
inline double smoothed_l_bound(const TrainLog& log, double factor) {
  double s = 0.0;
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    s = i == 0 ? log.records[i].l_bound : factor * s + (1.0 - factor) * log.records[i].l_bound;
  }
  return s;
}

inline double min_lambda(const TrainLog& log) {
  double m = log.records.empty() ? 0.0 : log.records.front().lambda;
  for (const auto& r : log.records) m = r.lambda < m ? r.lambda : m;
  return m;
}

}  // namespace nct
