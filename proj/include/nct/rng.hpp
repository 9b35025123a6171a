#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "nct/numeric/tape.hpp"

namespace nct {

/// Seeded random stream. All randomness in the library flows through these;
/// derive() forks an independent named substream so that, e.g., evaluation
/// draws never shift the training sequence.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  RngStream derive(std::string_view name) const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : name) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return RngStream((static_cast<std::uint64_t>(out[1]) << 32) | out[0]);
  }

  RngStream derive(std::uint64_t index) const {
    char buf[24];
    int n = 0;
    do {
      buf[n++] = static_cast<char>('0' + index % 10);
      index /= 10;
    } while (index && n < 23);
    return derive(std::string_view(buf, static_cast<std::size_t>(n)));
  }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  bool bernoulli(double p) { return uniform_(engine_) < p; }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal();
    return m;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace nct
