#include <gtest/gtest.h>

#include <cmath>

#include "nct/noise/process.hpp"

using namespace nct;

namespace {

GeneratorModel random_generator(std::uint64_t seed) {
  RngStream rng(seed);
  return make_generator(MlpSpec{2, {16}, 2, Activation::tanh}, rng);
}

// Per-coordinate mean and covariance of the rows of x.
void expect_standard_gaussian(const Matrix& x, double mean_tol, double cov_tol) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  const Matrix cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  for (Eigen::Index j = 0; j < x.cols(); ++j) EXPECT_LT(std::abs(mean(j)), mean_tol);
  for (Eigen::Index i = 0; i < cov.rows(); ++i) {
    for (Eigen::Index j = 0; j < cov.cols(); ++j) {
      EXPECT_LT(std::abs(cov(i, j) - (i == j ? 1.0 : 0.0)), cov_tol) << "entry " << i << "," << j;
    }
  }
}

}  // namespace

TEST(Schedule, EndpointsForOneInterval) {
  const NoiseSchedule s = make_schedule(1);
  EXPECT_EQ(s.sigma, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(s.alpha, (std::vector<double>{1.0, 0.0}));
}

TEST(Schedule, LinearSigmaGrid) {
  const NoiseSchedule s = make_schedule(4);
  EXPECT_EQ(s.sigma, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_NEAR(s.alpha[2], 0.866025, 1e-6);
  for (std::size_t k = 0; k <= 4; ++k) EXPECT_NEAR(s.alpha[k] * s.alpha[k] + s.sigma[k] * s.sigma[k], 1.0, 1e-12);
}

TEST(Schedule, InvariantsForDefaultGrid) {
  const NoiseSchedule s = make_schedule(16);
  EXPECT_EQ(s.sigma.front(), 0.0);
  EXPECT_EQ(s.sigma.back(), 1.0);
  for (std::size_t k = 1; k <= 16; ++k) EXPECT_GT(s.sigma[k], s.sigma[k - 1]);
  for (std::size_t k = 0; k <= 16; ++k) EXPECT_NEAR(s.alpha[k] * s.alpha[k] + s.sigma[k] * s.sigma[k], 1.0, 1e-12);
}

TEST(Schedule, ZeroIntervalsRejected) {
  EXPECT_THROW(make_schedule(0), ConfigError);
  EXPECT_THROW(parse_schedule_kind("cosine"), ConfigError);
}

TEST(Diffuse, Endpoints) {
  const NoiseSchedule s = make_schedule(4);
  const std::vector<double> z{0.3, -1.2}, eps{2.0, 0.7};
  EXPECT_EQ(diffuse(z, eps, 0, s), z);
  EXPECT_EQ(diffuse(z, eps, 4, s), eps);
}

TEST(Diffuse, MidpointArithmetic) {
  const NoiseSchedule s = make_schedule(4);
  const auto out = diffuse({1.0, 0.0}, {0.0, 1.0}, 2, s);
  EXPECT_NEAR(out[0], 0.866025, 1e-6);
  EXPECT_NEAR(out[1], 0.5, 1e-15);
}

TEST(Diffuse, OutOfRangeLevelIsIndexError) {
  const NoiseSchedule s = make_schedule(4);
  EXPECT_THROW(diffuse({0.0}, {0.0}, 5, s), IndexError);
  EXPECT_THROW(adjacent_pair({0.0}, {0.0}, 4, s), IndexError);
}

TEST(AdjacentPair, SharedNoiseAndEndpoints) {
  const NoiseSchedule s = make_schedule(8);
  const std::vector<double> z{0.4, -0.9}, eps{-1.5, 0.2};
  EXPECT_EQ(adjacent_pair(z, eps, 0, s).second, z);
  EXPECT_EQ(adjacent_pair(z, eps, 7, s).first, eps);
  const auto [hi, lo] = adjacent_pair(z, eps, 3, s);
  EXPECT_EQ(hi, diffuse(z, eps, 4, s));
  EXPECT_EQ(lo, diffuse(z, eps, 3, s));
}

TEST(AdjacentPair, MarginalsStandardGaussianAndCorrelation) {
  const NoiseSchedule s = make_schedule(16);
  RngStream rng(123);
  const LatentBatch b = sample_latents(100000, 2, rng);
  for (std::size_t k : {0u, 5u, 15u}) {
    const auto [hi, lo] = adjacent_pair_batch(b.z, b.eps, k, s);
    expect_standard_gaussian(hi, 0.02, 0.05);
    expect_standard_gaussian(lo, 0.02, 0.05);
    const double expected = s.alpha[k + 1] * s.alpha[k] + s.sigma[k + 1] * s.sigma[k];
    const double corr = (hi.col(0).array() * lo.col(0).array()).mean();
    EXPECT_NEAR(corr, expected, 0.02) << "k=" << k;
  }
}

TEST(CoupledBatch, DeterministicQuadrantConditionAndSeededReproducibility) {
  const GeneratorModel gen = random_generator(1);
  ConditionModel cm;
  cm.data_dim = 2;
  RngStream r1(77), r2(77);
  const CoupledBatch a = sample_coupled(gen, cm, 500, r1);
  const CoupledBatch b = sample_coupled(gen, cm, 500, r2);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.c, b.c);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    EXPECT_LT((a.x.row(i) - generate_batch(gen, a.z.row(i)).row(0)).norm(), 1e-12);
    EXPECT_EQ(static_cast<int>(a.c(i, 0)), quadrant_of(a.x(i, 0), a.x(i, 1)));
  }
}

TEST(CoupledBatch, LabelMarginalMatchesDirectMonteCarlo) {
  const GeneratorModel gen = random_generator(2);
  ConditionModel cm;
  cm.data_dim = 2;
  const std::size_t n = 100000;
  RngStream r1(10);
  const CoupledBatch b = sample_coupled(gen, cm, n, r1);
  // Independent estimate: push fresh latents through f_theta and classify by sign.
  RngStream r2(20);
  const Matrix x = generate_batch(gen, r2.normal_matrix(static_cast<Eigen::Index>(n), 2));
  std::array<double, 4> p1{}, p2{};
  for (Eigen::Index i = 0; i < b.c.rows(); ++i) p1[static_cast<std::size_t>(b.c(i, 0))] += 1.0 / n;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int q = (x(i, 0) >= 0 ? (x(i, 1) >= 0 ? 0 : 3) : (x(i, 1) >= 0 ? 1 : 2));
    p2[static_cast<std::size_t>(q)] += 1.0 / n;
  }
  for (std::size_t l = 0; l < 4; ++l) {
    const double se = std::sqrt(p1[l] * (1 - p1[l]) / n + p2[l] * (1 - p2[l]) / n);
    EXPECT_LT(std::abs(p1[l] - p2[l]), 3.0 * se + 1e-12) << "label " << l;
  }
}
