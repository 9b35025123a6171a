#include <gtest/gtest.h>

#include <filesystem>

#include "nct/models/checkpoint.hpp"

using namespace nct;

namespace {

GeneratorModel random_generator(std::uint64_t seed, MlpSpec spec = {2, {16, 16}, 2, Activation::tanh}) {
  RngStream rng(seed);
  return make_generator(spec, rng);
}

ConditionModel quadrant() {
  ConditionModel cm;
  cm.data_dim = 2;
  return cm;
}

AdapterModel zero_init_adapter(const GeneratorModel& gen, const ConditionModel& cm, std::uint64_t seed) {
  RngStream rng(seed);
  return make_adapter(make_adapter_spec(gen, cm, AdapterOptions{}), rng);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("nct_unit_" + name);
}

}  // namespace

TEST(Condition, QuadrantConvention) {
  ConditionModel cm = quadrant();
  RngStream rng(0);
  EXPECT_EQ(extract_condition(cm, {1.5, -0.2}, rng), std::vector<double>{3.0});
  EXPECT_EQ(extract_condition(cm, {1.0, 1.0}, rng), std::vector<double>{0.0});
  EXPECT_EQ(extract_condition(cm, {-1.0, 1.0}, rng), std::vector<double>{1.0});
  EXPECT_EQ(extract_condition(cm, {-1.0, -1.0}, rng), std::vector<double>{2.0});
  // Ties on an axis go to the positive side.
  EXPECT_EQ(extract_condition(cm, {0.0, 0.0}, rng), std::vector<double>{0.0});
  EXPECT_EQ(extract_condition(cm, {-2.0, 0.0}, rng), std::vector<double>{1.0});
}

TEST(Condition, CoarseGridAndProjection) {
  ConditionModel grid;
  grid.kind = ConditionKind::coarse_grid;
  grid.grid_cell = 1.0;
  grid.data_dim = 2;
  RngStream rng(0);
  EXPECT_EQ(extract_condition(grid, {0.4, 1.7}, rng), (std::vector<double>{0.5, 1.5}));

  ConditionModel proj;
  proj.kind = ConditionKind::noisy_projection;
  proj.projection = {1.0, 0.0};
  proj.data_dim = 2;
  EXPECT_EQ(extract_condition(proj, {2.0, 5.0}, rng), std::vector<double>{2.0});
}

TEST(Condition, FlipsAlwaysChangeTheLabel) {
  ConditionModel cm = quadrant();
  cm.flip_prob = 1.0;
  RngStream rng(4);
  std::array<int, 4> seen{};
  for (int i = 0; i < 400; ++i) {
    const auto c = extract_condition(cm, {1.0, 1.0}, rng);
    ASSERT_NE(c[0], 0.0);
    seen[static_cast<std::size_t>(c[0])]++;
  }
  for (int l = 1; l < 4; ++l) EXPECT_GT(seen[static_cast<std::size_t>(l)], 80);
}

TEST(Condition, Embeddings) {
  ConditionModel cm = quadrant();
  EXPECT_EQ(embed_condition(cm, {2.0}), (std::vector<double>{0, 0, 1, 0}));
  ConditionModel grid;
  grid.kind = ConditionKind::coarse_grid;
  grid.data_dim = 2;
  EXPECT_EQ(embed_condition(grid, {0.5, 1.5}), (std::vector<double>{0.5, 1.5}));
  ConditionModel proj;
  proj.kind = ConditionKind::noisy_projection;
  proj.data_dim = 2;
  EXPECT_EQ(embed_condition(proj, {2.0}), std::vector<double>{2.0});
}

TEST(Condition, ValidationAndParsing) {
  ConditionModel cm = quadrant();
  cm.flip_prob = 1.5;
  EXPECT_THROW(cm.validate(), ConfigError);
  EXPECT_THROW(parse_condition_kind("depth"), ConfigError);
  EXPECT_EQ(parse_condition_kind("coarse-grid"), ConditionKind::coarse_grid);
}

TEST(Generator, DeterministicAndZeroTheta) {
  const GeneratorModel gen = random_generator(3);
  EXPECT_EQ(generate(gen, {0.2, -0.4}), generate(gen, {0.2, -0.4}));
  const GeneratorModel zero = make_generator(gen.spec);
  for (double v : generate(zero, {1.0, 2.0})) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(generate(gen, {1.0}), ConfigError);
}

TEST(Adapter, ZeroInitIsBitwiseIdentity) {
  const GeneratorModel gen = random_generator(5);
  const ConditionModel cm = quadrant();
  const AdapterModel ad = zero_init_adapter(gen, cm, 6);
  RngStream rng(7);
  const Matrix z = rng.normal_matrix(1000, 2);
  Matrix c(1000, 1);
  for (Eigen::Index i = 0; i < c.rows(); ++i) c(i, 0) = static_cast<double>(rng.index(4));
  const Matrix base = generate_batch(gen, z);
  EXPECT_EQ(generate_conditional_batch(gen, ad, z, embed_conditions(cm, c)), base);
  // Perturbing the condition changes nothing either.
  const Matrix other = (c.array() + 1.0).unaryExpr([](double v) { return std::fmod(v, 4.0); }).matrix();
  EXPECT_EQ(generate_conditional_batch(gen, ad, z, embed_conditions(cm, other)), base);
  EXPECT_EQ(generate_conditional(gen, ad, cm, {0.1, 0.2}, {3.0}), generate(gen, {0.1, 0.2}));
}

TEST(Adapter, ZeroProjectionsAreTheOnlyZeroedSegments) {
  const GeneratorModel gen = random_generator(8);
  const AdapterModel ad = zero_init_adapter(gen, quadrant(), 9);
  for (std::size_t s = 0; s < ad.phi.layout().size(); ++s) {
    const auto& name = ad.phi.layout()[s].name;
    const auto seg = ad.phi.segment(s);
    const bool all_zero = std::all_of(seg.begin(), seg.end(), [](double v) { return v == 0.0; });
    if (name.rfind(kZeroPrefix, 0) == 0) {
      EXPECT_TRUE(all_zero) << name;
    } else if (name.find("weight") != std::string::npos) {
      EXPECT_FALSE(all_zero) << name;
    }
  }
}

TEST(Adapter, NonzeroCorrectionChangesOutput) {
  const GeneratorModel gen = random_generator(10);
  const ConditionModel cm = quadrant();
  AdapterModel ad = zero_init_adapter(gen, cm, 11);
  for (double& v : ad.phi.segment(weight_name(kZeroPrefix, 0))) v = 0.05;
  EXPECT_NE(generate_conditional(gen, ad, cm, {0.1, 0.2}, {1.0}), generate(gen, {0.1, 0.2}));
}

TEST(Ema, ArithmeticAndFixedPoints) {
  ParameterVector phi({{"p", {1}}}, {0.0});
  EmaState ema = make_ema(ParameterVector({{"p", {1}}}, {1.0}), 0.999);
  ema_update(ema, phi);
  EXPECT_DOUBLE_EQ(ema.shadow[0], 0.999);

  EmaState same = make_ema(phi, 0.9);
  ema_update(same, phi);
  EXPECT_EQ(same.shadow, phi);

  EmaState instant = make_ema(ParameterVector({{"p", {1}}}, {5.0}), 0.0);
  ema_update(instant, phi);
  EXPECT_EQ(instant.shadow[0], 0.0);

  EXPECT_THROW(ema_update(ema, ParameterVector({{"q", {2}}})), ConfigError);
  EXPECT_THROW(make_ema(phi, 1.0), ConfigError);
}

TEST(Ema, ShadowStaysWithinHistoricalRange) {
  ParameterVector phi({{"p", {4}}});
  EmaState ema = make_ema(phi, 0.95);
  std::vector<double> lo(4, 0.0), hi(4, 0.0);
  RngStream rng(12);
  for (int step = 0; step < 500; ++step) {
    for (std::size_t i = 0; i < 4; ++i) {
      phi[i] = rng.normal() * 3.0;
      lo[i] = std::min(lo[i], phi[i]);
      hi[i] = std::max(hi[i], phi[i]);
    }
    ema_update(ema, phi);
    for (std::size_t i = 0; i < 4; ++i) {
      ASSERT_GE(ema.shadow[i], lo[i]);
      ASSERT_LE(ema.shadow[i], hi[i]);
    }
  }
}

TEST(Checkpoint, GeneratorRoundTripIsBitwise) {
  const GeneratorModel gen = random_generator(13);
  const auto path = temp_path("gen.ckpt");
  save_checkpoint(path, generator_checkpoint(gen, 42, 1234, {{"note", "x"}}));
  const Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.step, 1234u);
  EXPECT_EQ(ck.rng_seed, 42u);
  EXPECT_EQ(ck.metadata.at("note"), "x");
  const GeneratorModel back = generator_from_checkpoint(ck);
  EXPECT_EQ(back.spec, gen.spec);
  EXPECT_EQ(back.theta, gen.theta);
  EXPECT_EQ(encode_checkpoint(ck), encode_checkpoint(generator_checkpoint(gen, 42, 1234, {{"note", "x"}})));
  std::filesystem::remove(path);
}

TEST(Checkpoint, AdapterBundleRoundTrip) {
  const GeneratorModel gen = random_generator(14);
  const ConditionModel cm = quadrant();
  AdapterModel ad = zero_init_adapter(gen, cm, 15);
  RngStream rng(16);
  for (double& v : ad.phi.storage()) v += 0.01 * rng.normal();
  EmaState ema = make_ema(ad.phi, 0.99);
  for (double& v : ema.shadow.storage()) v *= 0.5;
  const AdapterBundle b{gen, ad, ema, cm, make_schedule(16)};
  const AdapterBundle back = adapter_from_checkpoint(decode_checkpoint(encode_checkpoint(adapter_checkpoint(b, 1, 77))));
  EXPECT_EQ(back.adapter.phi, ad.phi);
  EXPECT_EQ(back.adapter.spec, ad.spec);
  EXPECT_EQ(back.ema.shadow, ema.shadow);
  EXPECT_EQ(back.ema.decay, 0.99);
  EXPECT_EQ(back.condition, cm);
  EXPECT_EQ(back.schedule, make_schedule(16));
  EXPECT_EQ(back.generator.theta, gen.theta);
}

TEST(Checkpoint, CorruptionIsLoadError) {
  const std::string good = encode_checkpoint(generator_checkpoint(random_generator(17), 0, 0));
  EXPECT_NO_THROW(decode_checkpoint(good));
  // Truncated blob.
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 8)), LoadError);
  // Flipped bit in the blob.
  std::string flipped = good;
  flipped.back() = static_cast<char>(flipped.back() ^ 0x01);
  EXPECT_THROW(decode_checkpoint(flipped), LoadError);
  // Manifest length larger than the file.
  std::string huge = good;
  huge[0] = static_cast<char>(0xff);
  huge[1] = static_cast<char>(0xff);
  EXPECT_THROW(decode_checkpoint(huge), LoadError);
  EXPECT_THROW(decode_checkpoint("abc"), LoadError);
  EXPECT_THROW(load_checkpoint(temp_path("does-not-exist.ckpt")), LoadError);
}

TEST(Checkpoint, VersionMismatchIsLoadError) {
  const std::string good = encode_checkpoint(generator_checkpoint(random_generator(18), 0, 0));
  const std::string key = "\"format_version\": 1";
  std::string bad = good;
  const auto pos = bad.find(key);
  ASSERT_NE(pos, std::string::npos);
  bad[pos + key.size() - 1] = '9';
  EXPECT_THROW(decode_checkpoint(bad), LoadError);
}

TEST(Checkpoint, WrongKindIsLoadError) {
  const Checkpoint ck = generator_checkpoint(random_generator(19), 0, 0);
  EXPECT_THROW(adapter_from_checkpoint(ck), LoadError);
}
