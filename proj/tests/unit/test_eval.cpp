#include <gtest/gtest.h>

#include <cmath>

#include "nct/eval/independence.hpp"
#include "nct/eval/metrics.hpp"
#include "nct/eval/oracle.hpp"
#include "nct/noise/process.hpp"

using namespace nct;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Linear generator x = 2 z: rotation and reflection symmetric, so every
// quadrant has probability 1/4.
GeneratorModel symmetric_generator() {
  GeneratorModel gen = make_generator(MlpSpec{2, {}, 2, Activation::tanh});
  gen.theta.segment("layer0.weight")[0] = 2.0;
  gen.theta.segment("layer0.weight")[3] = 2.0;
  return gen;
}

ConditionModel quadrant() {
  ConditionModel cm;
  cm.data_dim = 2;
  return cm;
}

}  // namespace

TEST(Mmd, IdenticalSetsGiveZero) {
  const Matrix x = RngStream(1).normal_matrix(30, 2);
  for (const KernelSpec& k : {KernelSpec::rbf({0.5, 1.0}), KernelSpec::neg_squared_distance(),
                              KernelSpec::shifted_sqrt(0.5), KernelSpec{}}) {
    EXPECT_NEAR(mmd2_vstat(x, x, k), 0.0, 1e-12) << k.describe();
  }
}

TEST(Mmd, SingletonClosedForms) {
  const Matrix x = rows({{0.0, 0.0}}), y = rows({{1.0, 0.0}});
  EXPECT_DOUBLE_EQ(mmd2_vstat(x, y, KernelSpec::neg_squared_distance()), 2.0);
  EXPECT_NEAR(mmd2_vstat(x, y, KernelSpec::rbf({1.0})), 2.0 - 2.0 * std::exp(-0.5), 1e-15);
  EXPECT_NEAR(mmd2_vstat(x, y, KernelSpec::rbf({1.0})), 0.786939, 1e-6);
}

TEST(Mmd, MatchesDirectTripleSum) {
  RngStream rng(2);
  const Matrix x = rng.normal_matrix(7, 2), y = rng.normal_matrix(5, 2).array() + 0.5;
  const KernelSpec k = KernelSpec::rbf({0.7, 1.3});
  auto kern = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    const double r2 = (a - b).squaredNorm();
    return 0.5 * (std::exp(-r2 / (2 * 0.49)) + std::exp(-r2 / (2 * 1.69)));
  };
  double xx = 0, yy = 0, xy = 0;
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = 0; j < 7; ++j) xx += kern(x.row(i), x.row(j));
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) yy += kern(y.row(i), y.row(j));
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = 0; j < 5; ++j) xy += kern(x.row(i), y.row(j));
  EXPECT_NEAR(mmd2_vstat(x, y, k), xx / 49 + yy / 25 - 2 * xy / 35, 1e-13);
}

TEST(Mmd, EmptyOrMismatchedIsConfigError) {
  EXPECT_THROW(mmd2_vstat(Matrix(0, 2), rows({{1.0, 0.0}}), KernelSpec::rbf({1.0})), ConfigError);
  EXPECT_THROW(mmd2_vstat(rows({{1.0}}), rows({{1.0, 0.0}}), KernelSpec::rbf({1.0})), ConfigError);
  EXPECT_THROW(EmpiricalDistribution(Matrix(0, 2)), ConfigError);
}

TEST(MedianBandwidth, Examples) {
  EXPECT_DOUBLE_EQ(median_bandwidth(rows({{0.0, 0.0}}), rows({{3.0, 0.0}})), 3.0);
  EXPECT_EQ(median_bandwidth(rows({{1.0, 1.0}, {1.0, 1.0}}), rows({{1.0, 1.0}})), 1.0);
  const KernelSpec k = resolve_kernel(KernelSpec{}, rows({{0.0, 0.0}}), rows({{3.0, 0.0}}));
  EXPECT_EQ(k.bandwidths, (std::vector<double>{1.5, 3.0, 6.0}));
}

TEST(PermutationTest, SameDistributionIsNotRejectedAndShiftIs) {
  RngStream rng(3);
  const Matrix a = rng.normal_matrix(200, 2), b = rng.normal_matrix(200, 2);
  const PermutationResult same = mmd_permutation_test(a, b, KernelSpec{}, 200, RngStream(4));
  EXPECT_GE(same.p_value, 0.01);
  EXPECT_EQ(same.permutations, 200u);
  EXPECT_LE(same.statistic, same.null_q99 * 1.5);
  const Matrix shifted = (rng.normal_matrix(200, 2).array() + 1.0).matrix();
  const PermutationResult diff = mmd_permutation_test(a, shifted, KernelSpec{}, 200, RngStream(4));
  EXPECT_DOUBLE_EQ(diff.p_value, 1.0 / 201.0);
  EXPECT_GT(diff.statistic, diff.null_q99);
}

TEST(PermutationTest, NullCalibration) {
  // Under the null the p-value is super-uniform: P(p <= 0.05) <= 0.05 up to
  // Monte Carlo error over 100 seeded runs.
  int small = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    RngStream rng(100 + s);
    const Matrix a = rng.normal_matrix(40, 2), b = rng.normal_matrix(40, 2);
    small += mmd_permutation_test(a, b, KernelSpec{}, 99, rng.derive("perm"), 1).p_value <= 0.05 ? 1 : 0;
  }
  EXPECT_LE(small, 12);
}

TEST(ConsistencyMetric, OneMismatchAmongFour) {
  const Matrix x = rows({{1, 1}, {-1, 1}, {-1, -1}, {1, -1}});
  const ConsistencyResult r = consistency_metric(x, rows({{0}, {1}, {2}, {0}}), quadrant());
  EXPECT_DOUBLE_EQ(r.l1, 0.5);
  EXPECT_DOUBLE_EQ(r.mismatch_rate, 0.25);
  const ConsistencyResult ok = consistency_metric(x, rows({{0}, {1}, {2}, {3}}), quadrant());
  EXPECT_EQ(ok.l1, 0.0);
  EXPECT_EQ(ok.mismatch_rate, 0.0);
}

TEST(ConsistencyMetric, NoisyProjectionWithPerfectSamples) {
  ConditionModel cm;
  cm.kind = ConditionKind::noisy_projection;
  cm.projection = {1.0, 0.0};
  cm.noise_scale = 0.5;
  const Matrix x = rows({{2.0, 5.0}, {-1.0, 3.0}});
  const ConsistencyResult r = consistency_metric(x, rows({{2.0}, {-1.0}}), cm);
  EXPECT_EQ(r.l1, 0.0);
}

TEST(Oracle, QuadrantSamplesStayInQuadrant) {
  const GeneratorModel gen = symmetric_generator();
  const ConditionModel cm = quadrant();
  for (int label = 0; label < 4; ++label) {
    RngStream rng(5 + label);
    const OracleSamples o = conditional_oracle(gen, cm, {static_cast<double>(label)}, 2000, rng);
    EXPECT_EQ(o.samples.size(), 2000);
    const Matrix c = Matrix::Constant(2000, 1, label);
    EXPECT_EQ(consistency_metric(o.samples.samples, c, cm).mismatch_rate, 0.0);
    const double se = std::sqrt(0.25 * 0.75 / static_cast<double>(o.draws));
    EXPECT_NEAR(o.acceptance_rate(), 0.25, 4 * se) << "label " << label;
  }
}

TEST(Oracle, CoarseGridAcceptsExactCells) {
  const GeneratorModel gen = symmetric_generator();
  ConditionModel cm;
  cm.kind = ConditionKind::coarse_grid;
  cm.grid_cell = 1.0;
  RngStream rng(9);
  const OracleSamples o = conditional_oracle(gen, cm, {0.5, -1.5}, 500, rng);
  for (Eigen::Index i = 0; i < o.samples.size(); ++i) {
    EXPECT_GE(o.samples.samples(i, 0), 0.0);
    EXPECT_LT(o.samples.samples(i, 0), 1.0);
    EXPECT_GE(o.samples.samples(i, 1), -2.0);
    EXPECT_LT(o.samples.samples(i, 1), -1.0);
  }
}

TEST(Oracle, BudgetExhaustionIsInfeasible) {
  const GeneratorModel gen = symmetric_generator();
  ConditionModel cm;
  cm.kind = ConditionKind::coarse_grid;
  RngStream rng(10);
  OracleOptions opt;
  opt.max_draws = 5000;
  EXPECT_THROW(conditional_oracle(gen, cm, {40.5, 40.5}, 10, rng, opt), OracleInfeasible);
}

TEST(ChanceRate, SymmetricGeneratorGivesThreeQuarters) {
  const ChanceRate r = chance_mismatch_rate(symmetric_generator(), quadrant(), 40000, RngStream(11));
  EXPECT_NEAR(r.rate, 0.75, 1e-3);
  for (double p : r.label_probs) EXPECT_NEAR(p, 0.25, 0.01);
  EXPECT_LT(r.standard_error, 1e-3);
}

TEST(ChanceRate, MatchesIgnoringSamplerMonteCarlo) {
  // A sampler that ignores c mismatches with probability 1 - sum p(c)^2.
  GeneratorModel gen = symmetric_generator();
  gen.theta.segment("layer0.bias")[0] = 1.0;  // shifted: unequal quadrant masses
  const ConditionModel cm = quadrant();
  const ChanceRate r = chance_mismatch_rate(gen, cm, 40000, RngStream(12));
  RngStream rng(13);
  const IndependentBatch b = sample_independent(gen, cm, 40000, rng);
  const double mc = consistency_metric(generate_batch(gen, b.z), b.c, cm).mismatch_rate;
  EXPECT_NEAR(mc, r.rate, 4 * (rate_standard_error(mc, 40000) + r.standard_error));
  double max_p = 0;
  for (double p : r.label_probs) max_p = std::max(max_p, p);
  EXPECT_GT(r.rate, 1 - max_p);
}

TEST(Independence, FullyDiffusedLatentsPassMostSeededRuns) {
  const GeneratorModel gen = symmetric_generator();
  const ConditionModel cm = quadrant();
  const NoiseSchedule s = make_schedule(16);
  int passed = 0;
  const int runs = 50;
  for (int r = 0; r < runs; ++r) {
    RngStream rng(200 + static_cast<std::uint64_t>(r));
    const CoupledBatch b = sample_coupled(gen, cm, 150, rng);
    const Matrix eps = rng.normal_matrix(150, 2);
    const Matrix zN = diffuse_batch(b.z, eps, 16, s);
    passed += independence_gap(zN, b.cembed, KernelSpec{}, rng.derive("perm"), 99).p_value >= 0.01 ? 1 : 0;
  }
  EXPECT_GE(passed, 49);
}

TEST(Independence, UndiffusedLatentsAreDependent) {
  const GeneratorModel gen = symmetric_generator();
  const ConditionModel cm = quadrant();
  RngStream rng(14);
  const CoupledBatch b = sample_coupled(gen, cm, 300, rng);
  const IndependenceResult r = independence_gap(b.z, b.cembed, KernelSpec{}, rng.derive("perm"), 200);
  EXPECT_LT(r.p_value, 0.01);
  EXPECT_GT(r.gap, r.null_q99);
}

TEST(Independence, ConstantConditionGivesZeroGap) {
  RngStream rng(15);
  const Matrix z = rng.normal_matrix(120, 2);
  const Matrix c = embed_conditions(quadrant(), Matrix::Constant(120, 1, 2.0));
  const IndependenceResult r = independence_gap(z, c, KernelSpec{}, rng.derive("perm"), 50);
  EXPECT_NEAR(r.gap, 0.0, 1e-12);
  EXPECT_THROW(independence_gap(rng.normal_matrix(20, 2), Matrix::Zero(20, 4), KernelSpec{}, rng), ConfigError);
}

TEST(Independence, GroupedAndDirectStatisticsAgree) {
  const GeneratorModel gen = symmetric_generator();
  const ConditionModel cm = quadrant();
  RngStream rng(16);
  const CoupledBatch b = sample_coupled(gen, cm, 200, rng);
  const Matrix z = diffuse_batch(b.z, rng.normal_matrix(200, 2), 3, make_schedule(16));
  const auto grouped = detail::independence_gap_impl(z, b.cembed, KernelSpec{}, RngStream(17), 60, 1, 64);
  const auto direct = detail::independence_gap_impl(z, b.cembed, KernelSpec{}, RngStream(17), 60, 1, 0);
  EXPECT_NEAR(grouped.gap, direct.gap, 1e-12);
  EXPECT_NEAR(grouped.null_q99, direct.null_q99, 1e-12);
  EXPECT_EQ(grouped.p_value, direct.p_value);
  // More distinct embeddings than the cap falls back to the direct loop.
  const Matrix c = rng.normal_matrix(200, 1);
  const auto capped = detail::independence_gap_impl(z, c, KernelSpec{}, RngStream(18), 20, 1, 4);
  const auto plain = detail::independence_gap_impl(z, c, KernelSpec{}, RngStream(18), 20, 1, 0);
  EXPECT_EQ(capped.gap, plain.gap);
}
