#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nct/error.hpp"
#include "nct/numeric/tape.hpp"

namespace nct {

enum class KernelKind { rbf_mixture, neg_squared_distance, shifted_sqrt };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::rbf_mixture: return "rbf-mixture";
    case KernelKind::neg_squared_distance: return "neg-squared-distance";
    case KernelKind::shifted_sqrt: return "shifted-sqrt";
  }
  return "?";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "rbf-mixture") return KernelKind::rbf_mixture;
  if (s == "neg-squared-distance") return KernelKind::neg_squared_distance;
  if (s == "shifted-sqrt") return KernelKind::shifted_sqrt;
  throw ConfigError("unknown kernel '" + std::string(s) + "'");
}

/// rbf-mixture averages exp(-r^2 / 2h^2) over its bandwidths, which are either
/// given or derived as multiples of the median pairwise distance.
/// neg-squared-distance (-r^2) and shifted-sqrt (c - sqrt(r^2 + c^2)) are at
/// best conditionally positive definite.
struct KernelSpec {
  KernelKind kind = KernelKind::rbf_mixture;
  std::vector<double> bandwidths;
  bool median_heuristic = true;
  std::vector<double> median_multipliers{0.5, 1.0, 2.0};
  double c = 1.0;

  bool positive_definite() const { return kind == KernelKind::rbf_mixture; }
  bool resolved() const { return kind != KernelKind::rbf_mixture || !median_heuristic; }

  std::string describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (kind == KernelKind::rbf_mixture) {
      if (median_heuristic && bandwidths.empty()) {
        os << "(median";
        for (double m : median_multipliers) os << ' ' << m << 'x';
        os << ')';
      } else {
        os << '(';
        for (std::size_t i = 0; i < bandwidths.size(); ++i) os << (i ? " " : "") << bandwidths[i];
        os << ')';
      }
    } else if (kind == KernelKind::shifted_sqrt) {
      os << "(c=" << c << ")";
    }
    if (!positive_definite()) os << "[non-PSD]";
    return os.str();
  }

  static KernelSpec rbf(std::vector<double> bw) {
    KernelSpec k;
    k.bandwidths = std::move(bw);
    k.median_heuristic = false;
    return k;
  }
  static KernelSpec neg_squared_distance() {
    KernelSpec k;
    k.kind = KernelKind::neg_squared_distance;
    k.median_heuristic = false;
    return k;
  }
  static KernelSpec shifted_sqrt(double c) {
    KernelSpec k;
    k.kind = KernelKind::shifted_sqrt;
    k.median_heuristic = false;
    k.c = c;
    return k;
  }
};

inline double kernel_from_sq(const KernelSpec& k, double sq) {
  switch (k.kind) {
    case KernelKind::rbf_mixture: {
      double s = 0.0;
      for (double h : k.bandwidths) s += std::exp(-sq / (2.0 * h * h));
      return s / static_cast<double>(k.bandwidths.size());
    }
    case KernelKind::neg_squared_distance: return -sq;
    case KernelKind::shifted_sqrt: return k.c - std::sqrt(sq + k.c * k.c);
  }
  return 0.0;
}

/// Worker count for evaluation: NCT_THREADS if set, else 1.
inline unsigned evaluation_threads() {
  if (const char* env = std::getenv("NCT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

/// Runs body(i) for i in [0, n) across up to `threads` workers. Each index is
/// handled by exactly one worker, so results written per index do not depend
/// on the thread count.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) body(i);
    });
  }
}

/// Upper median of all ordered pairwise distances of the pooled rows,
/// diagonal included, so duplicating both sets leaves it unchanged. Falls back
/// to 1.0 when the median is zero.
inline double median_bandwidth(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) throw ConfigError("median_bandwidth: dimension mismatch");
  Matrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const auto n = static_cast<std::size_t>(pooled.rows());
  if (n < 2) throw ConfigError("median_bandwidth needs at least two pooled samples");
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d[i * n + j] = (pooled.row(static_cast<Eigen::Index>(i)) -
                      pooled.row(static_cast<Eigen::Index>(j))).squaredNorm();
    }
  }
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  const double med = std::sqrt(*mid);
  return med > 0.0 ? med : 1.0;
}

/// Fills in median-derived bandwidths for the given samples.
inline KernelSpec resolve_kernel(const KernelSpec& k, const Matrix& x, const Matrix& y) {
  if (k.resolved()) {
    if (k.kind == KernelKind::rbf_mixture && k.bandwidths.empty()) {
      throw ConfigError("rbf-mixture kernel needs bandwidths or the median heuristic");
    }
    return k;
  }
  KernelSpec r = k;
  const double med = median_bandwidth(x, y);
  r.bandwidths.clear();
  for (double m : k.median_multipliers) r.bandwidths.push_back(m * med);
  r.median_heuristic = false;
  return r;
}

/// K(a_i, b_j) for every pair of rows; `k` must be resolved.
inline Matrix kernel_matrix(const Matrix& a, const Matrix& b, const KernelSpec& k,
                            unsigned threads = 1) {
  Matrix out(a.rows(), b.rows());
  parallel_for(static_cast<std::size_t>(a.rows()), threads, [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      out(ii, j) = kernel_from_sq(k, (a.row(ii) - b.row(j)).squaredNorm());
    }
  });
  return out;
}

}  // namespace nct
