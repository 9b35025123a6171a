#pragma once

// Joint-versus-product test on (z, c) pairs.
//
// Rows are joint vectors (z_i, e_{pi(i)}) with e the condition embedding.
// The statistic is MMD^2 between the identity pairing and one fixed random
// pairing pi'. The null replaces the identity with uniformly random pairings;
// when z and c are independent the identity is exchangeable with them, so
// the permutation p-value is exact.
//
// With an RBF mixture the joint kernel factors per bandwidth as
// K_z(i, j) K_e(a, b), so every pairing reuses the same two Gram matrices.

#include <map>
#include <numeric>
#include <vector>

#include "nct/error.hpp"
#include "nct/eval/mmd.hpp"

namespace nct {

inline constexpr std::size_t kMinIndependenceBatch = 100;

struct IndependenceResult {
  double gap = 0.0;
  double p_value = 1.0;
  double null_q99 = 0.0;
  std::size_t permutations = 0;
  KernelSpec kernel;
};

namespace detail {

inline std::vector<std::size_t> random_permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n > 0 ? n - 1 : 0; i > 0; --i) std::swap(p[i], p[rng.index(i + 1)]);
  return p;
}

inline Matrix gather(const Matrix& m, const std::vector<std::size_t>& idx) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}


/// Rows of `m` mapped to ids of their distinct values, or empty when there
/// are more than `max_groups` distinct rows.
inline std::vector<std::size_t> row_groups(const Matrix& m, std::size_t max_groups,
                                           std::vector<std::size_t>& representatives) {
  std::map<std::vector<double>, std::size_t> ids;
  std::vector<std::size_t> g(static_cast<std::size_t>(m.rows()));
  representatives.clear();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> key(m.row(i).data(), m.row(i).data() + m.cols());
    auto [it, inserted] = ids.emplace(std::move(key), ids.size());
    if (inserted) {
      if (ids.size() > max_groups) return {};
      representatives.push_back(static_cast<std::size_t>(i));
    }
    g[static_cast<std::size_t>(i)] = it->second;
  }
  return g;
}

inline Matrix one_hot(const std::vector<std::size_t>& groups, const std::vector<std::size_t>& s,
                      std::size_t width) {
  Matrix o = Matrix::Zero(static_cast<Eigen::Index>(s.size()), static_cast<Eigen::Index>(width));
  for (std::size_t j = 0; j < s.size(); ++j) o(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(groups[s[j]])) = 1.0;
  return o;
}

/// `max_groups` bounds the distinct condition embeddings for which the
/// statistic is computed through per-group kernel sums (a GEMM per pairing)
/// instead of the direct double loop; 0 forces the direct loop.
inline IndependenceResult independence_gap_impl(const Matrix& z, const Matrix& cembed, const KernelSpec& k,
                                                RngStream rng, std::size_t permutations, unsigned threads,
                                                std::size_t max_groups) {
  if (z.rows() != cembed.rows()) throw ConfigError("independence_gap: misaligned batches");
  const auto n = static_cast<std::size_t>(z.rows());
  if (n < kMinIndependenceBatch) {
    throw ConfigError("independence_gap needs a batch of at least " +
                      std::to_string(kMinIndependenceBatch) + " rows, got " + std::to_string(n));
  }
  if (k.kind != KernelKind::rbf_mixture) {
    throw ConfigError("independence_gap uses an RBF mixture kernel");
  }
  if (permutations == 0) throw ConfigError("independence_gap needs at least one permutation");

  const std::vector<std::size_t> fresh = random_permutation(n, rng);
  Matrix joint(static_cast<Eigen::Index>(n), z.cols() + cembed.cols());
  joint << z, cembed;
  Matrix shuffled(joint.rows(), joint.cols());
  shuffled << z, gather(cembed, fresh);

  IndependenceResult res;
  res.kernel = resolve_kernel(k, joint, shuffled);
  res.permutations = permutations;
  const std::size_t H = res.kernel.bandwidths.size();

  std::vector<Matrix> kz(H), ke(H);
  for (std::size_t h = 0; h < H; ++h) {
    const KernelSpec one = KernelSpec::rbf({res.kernel.bandwidths[h]});
    kz[h] = kernel_matrix(z, z, one, threads);
    ke[h] = kernel_matrix(cembed, cembed, one, threads);
  }
  const double inv_h = 1.0 / static_cast<double>(H);
  const double nn = static_cast<double>(n) * static_cast<double>(n);

  // MMD^2 between pairing s and the fixed pairing; the fixed-pairing self
  // term is the same for every s.
  double yy = 0.0;
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        yy += kz[h](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
              ke[h](static_cast<Eigen::Index>(fresh[i]), static_cast<Eigen::Index>(fresh[j]));
      }
    }
  }
  yy *= inv_h / nn;

  std::vector<std::size_t> reps;
  const std::vector<std::size_t> groups =
      max_groups > 0 ? row_groups(cembed, max_groups, reps) : std::vector<std::size_t>{};
  const std::size_t U = reps.size();
  std::vector<Matrix> gk(H), kz_fresh(H);
  if (!groups.empty()) {
    const Matrix of = one_hot(groups, fresh, U);
    for (std::size_t h = 0; h < H; ++h) {
      gk[h].resize(static_cast<Eigen::Index>(U), static_cast<Eigen::Index>(U));
      for (std::size_t a = 0; a < U; ++a) {
        for (std::size_t b = 0; b < U; ++b) {
          gk[h](static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
              ke[h](static_cast<Eigen::Index>(reps[a]), static_cast<Eigen::Index>(reps[b]));
        }
      }
      kz_fresh[h] = kz[h] * of;
    }
  }

  auto stat = [&](const std::vector<std::size_t>& s) {
    double xx = 0.0, xy = 0.0;
    if (!groups.empty()) {
      const Matrix os = one_hot(groups, s, U);
      for (std::size_t h = 0; h < H; ++h) {
        const Matrix w = os * gk[h];
        xx += w.cwiseProduct(kz[h] * os).sum();
        xy += w.cwiseProduct(kz_fresh[h]).sum();
      }
      return (xx - 2.0 * xy) * inv_h / nn + yy;
    }
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto* kzr = kz[h].row(static_cast<Eigen::Index>(i)).data();
        const auto* ker = ke[h].row(static_cast<Eigen::Index>(s[i])).data();
        double ax = 0.0, ay = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          ax += kzr[j] * ker[s[j]];
          ay += kzr[j] * ker[fresh[j]];
        }
        xx += ax;
        xy += ay;
      }
    }
    return (xx - 2.0 * xy) * inv_h / nn + yy;
  };

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  res.gap = stat(identity);

  std::vector<std::vector<std::size_t>> perms(permutations);
  for (auto& p : perms) p = random_permutation(n, rng);
  std::vector<double> null(permutations);
  parallel_for(permutations, threads, [&](std::size_t b) { null[b] = stat(perms[b]); });

  std::size_t exceed = 0;
  for (double v : null) exceed += v >= res.gap ? 1 : 0;
  res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(permutations + 1);
  res.null_q99 = quantile(null, 0.99);
  return res;
}

}  // namespace detail

inline IndependenceResult independence_gap(const Matrix& z, const Matrix& cembed,
                                           const KernelSpec& k, RngStream rng,
                                           std::size_t permutations = 200,
                                           unsigned threads = evaluation_threads()) {
  return detail::independence_gap_impl(z, cembed, k, std::move(rng), permutations, threads, 64);
}

}  // namespace nct
