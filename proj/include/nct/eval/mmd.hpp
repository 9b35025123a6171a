#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "nct/error.hpp"
#include "nct/eval/kernel.hpp"
#include "nct/rng.hpp"

namespace nct {

/// A batch of sample rows with a short tag saying where they came from.
struct EmpiricalDistribution {
  Matrix samples;
  std::string tag;

  EmpiricalDistribution() = default;
  EmpiricalDistribution(Matrix s, std::string t = {}) : samples(std::move(s)), tag(std::move(t)) {
    validate();
  }

  void validate() const {
    if (samples.rows() == 0 || samples.cols() == 0) {
      throw ConfigError("empirical distribution '" + tag + "' is empty");
    }
    if (!samples.allFinite()) {
      throw ConfigError("empirical distribution '" + tag + "' has non-finite values");
    }
  }
  Eigen::Index size() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
};

namespace detail {

inline void check_pair(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw ConfigError("mmd: empty sample set");
  if (x.cols() != y.cols()) {
    throw ConfigError("mmd: dimension mismatch (" + std::to_string(x.cols()) + " vs " +
                      std::to_string(y.cols()) + ")");
  }
}

}  // namespace detail

/// V-statistic MMD^2 from a pooled kernel matrix whose first nx rows are X.
inline double mmd2_from_pooled(const Matrix& K, Eigen::Index nx) {
  const Eigen::Index n = K.rows();
  const Eigen::Index ny = n - nx;
  const double xx = K.topLeftCorner(nx, nx).sum();
  const double yy = K.bottomRightCorner(ny, ny).sum();
  const double xy = K.topRightCorner(nx, ny).sum();
  const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
  return xx / (fx * fx) + yy / (fy * fy) - 2.0 * xy / (fx * fy);
}

/// Biased (diagonal-inclusive) MMD^2. A median-heuristic kernel is resolved
/// on the pooled samples first.
inline double mmd2_vstat(const Matrix& x, const Matrix& y, const KernelSpec& k) {
  detail::check_pair(x, y);
  const KernelSpec r = resolve_kernel(k, x, y);
  const double xx = kernel_matrix(x, x, r).mean();
  const double yy = kernel_matrix(y, y, r).mean();
  const double xy = kernel_matrix(x, y, r).mean();
  return xx + yy - 2.0 * xy;
}

inline double mmd2_vstat(const EmpiricalDistribution& x, const EmpiricalDistribution& y,
                         const KernelSpec& k) {
  return mmd2_vstat(x.samples, y.samples, k);
}

struct PermutationResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double null_q99 = 0.0;
  std::size_t permutations = 0;
  KernelSpec kernel;
};

/// Value at quantile q of `v` (linear interpolation between order statistics).
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty set");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// MMD^2 of a labelling of a pooled kernel matrix: in_x[i] says whether row i
/// counts as X.
inline double mmd2_labelled(const Matrix& K, const std::vector<char>& in_x, Eigen::Index nx) {
  const Eigen::Index n = K.rows();
  const double fx = static_cast<double>(nx), fy = static_cast<double>(n - nx);
  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double to_x = 0.0, to_y = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) (in_x[static_cast<std::size_t>(j)] ? to_x : to_y) += K(i, j);
    if (in_x[static_cast<std::size_t>(i)]) {
      xx += to_x;
      xy += to_y;
    } else {
      yy += to_y;
    }
  }
  return xx / (fx * fx) + yy / (fy * fy) - 2.0 * xy / (fx * fy);
}

/// Two-sample permutation test on the V-statistic. The null relabels the
/// pooled samples uniformly at random; p = (1 + #{null >= observed}) / (B + 1).
inline PermutationResult mmd_permutation_test(const Matrix& x, const Matrix& y,
                                              const KernelSpec& k, std::size_t permutations,
                                              RngStream rng,
                                              unsigned threads = evaluation_threads()) {
  detail::check_pair(x, y);
  if (permutations == 0) throw ConfigError("permutation test needs at least one permutation");
  PermutationResult res;
  res.kernel = resolve_kernel(k, x, y);
  res.permutations = permutations;
  Matrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Matrix K = kernel_matrix(pooled, pooled, res.kernel, threads);
  const Eigen::Index nx = x.rows();
  res.statistic = mmd2_from_pooled(K, nx);

  const auto n = static_cast<std::size_t>(pooled.rows());
  std::vector<std::vector<char>> labels(permutations);
  for (auto& lab : labels) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.index(i + 1)]);
    lab.assign(n, 0);
    for (Eigen::Index i = 0; i < nx; ++i) lab[idx[static_cast<std::size_t>(i)]] = 1;
  }
  std::vector<double> null(permutations);
  parallel_for(permutations, threads, [&](std::size_t b) { null[b] = mmd2_labelled(K, labels[b], nx); });

  std::size_t exceed = 0;
  for (double v : null) exceed += v >= res.statistic ? 1 : 0;
  res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(permutations + 1);
  res.null_q99 = quantile(null, 0.99);
  return res;
}

}  // namespace nct
