#include "bevlink/channel.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "bevlink/channel_codec.hpp"
#include "bevlink/errors.hpp"

namespace bevlink {
namespace {

double empirical_noise_variance(const ChannelSymbols& tx, const ChannelSymbols& rx) {
  const auto n = rx.values - tx.values;
  return n.var(/*unbiased=*/false).item<double>() + std::pow(n.mean().item<double>(), 2);
}

TEST(SnrDb, NoiseVarianceFromDecibels) {
  EXPECT_DOUBLE_EQ(SnrDb{0.0}.noise_variance(), 1.0);
  EXPECT_NEAR(SnrDb{10.0}.noise_variance(), 0.1, 1e-15);
  EXPECT_NEAR(SnrDb{-5.0}.noise_variance(), std::pow(10.0, 0.5), 1e-12);
}

TEST(PowerNormalize, HandComputedExample) {
  const auto s = power_normalize(torch::tensor({3.0, 4.0}));
  EXPECT_NEAR(s.values[0].item<double>(), 0.8485, 1e-4);
  EXPECT_NEAR(s.values[1].item<double>(), 1.1314, 1e-4);
  EXPECT_NEAR(s.average_power(), 1.0, 1e-12);
}

TEST(PowerNormalize, ScaleInvariantWithUnitPowerProperty) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(1, 500);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  for (int trial = 0; trial < 100; ++trial) {
    torch::manual_seed(trial);
    const auto x = torch::randn({len(rng)}, torch::kFloat64) * 10.0;
    const auto a = power_normalize(x);
    const auto b = power_normalize(x * scale(rng));
    ASSERT_NEAR(a.average_power(), 1.0, 1e-6);
    ASSERT_TRUE(torch::allclose(a.values, b.values, 1e-9, 1e-12));
  }
}

TEST(PowerNormalize, DegenerateInputsAreRejected) {
  EXPECT_THROW(power_normalize(torch::zeros({5})), DegenerateInputError);
  EXPECT_THROW(power_normalize(torch::empty({0})), DegenerateInputError);
  EXPECT_THROW(power_normalize(torch::tensor({1.0, std::numeric_limits<double>::quiet_NaN()})), DegenerateInputError);
}

TEST(Awgn, VanishingNoiseAtVeryHighSnr) {
  const auto s = power_normalize(torch::randn({1000}, torch::kFloat64));
  const auto r = awgn(s, SnrDb{300.0}, 1);
  EXPECT_LT((r.values - s.values).abs().max().item<double>(), 1e-6);
  EXPECT_EQ(r.shape, s.shape);
}

TEST(Awgn, EmpiricalVarianceWithinOnePercent) {
  torch::manual_seed(3);
  const auto s = power_normalize(torch::randn({1'000'000}, torch::kFloat64));
  for (double snr : {0.0, 10.0, 20.0}) {
    const auto r = awgn(s, SnrDb{snr}, 100 + static_cast<std::uint64_t>(snr));
    const double expect = std::pow(10.0, -snr / 10.0);
    EXPECT_NEAR(empirical_noise_variance(s, r) / expect, 1.0, 0.01) << "snr " << snr;
  }
}

TEST(Awgn, DeterministicGivenSeed) {
  const auto s = power_normalize(torch::ones({64}, torch::kFloat64));
  EXPECT_TRUE(torch::equal(awgn(s, SnrDb{5}, 9).values, awgn(s, SnrDb{5}, 9).values));
  EXPECT_FALSE(torch::equal(awgn(s, SnrDb{5}, 9).values, awgn(s, SnrDb{5}, 10).values));
}

TEST(NormalizePowerBatch, EachSampleHasUnitPower) {
  torch::manual_seed(4);
  auto x = torch::randn({3, 4, 5, 5});
  x[1] *= 100.0;
  const auto y = normalize_power_batch(x);
  const auto p = y.pow(2).mean({1, 2, 3});
  EXPECT_TRUE(torch::allclose(p, torch::ones({3}), 1e-5, 1e-5));
}

TEST(AddAwgn, UsesRequestedVariance) {
  auto gen = make_generator(5);
  const auto x = torch::zeros({200000});
  const auto y = add_awgn(x, SnrDb{3.0}, gen);
  EXPECT_NEAR(y.var().item<double>() / std::pow(10.0, -0.3), 1.0, 0.02);
}

TEST(ChannelCodec, ShapeContractsAndDeterminism) {
  torch::manual_seed(6);
  const auto grid = BevGridSpec::centered(16.0, 16);
  ChannelEncoder enc(48, 16, 12);
  ChannelDecoder dec(12, 16, 48);
  const BEVFeatureMap x{torch::randn({48, 16, 16}), grid};
  const auto sym = channel_encode(enc, x);
  EXPECT_EQ(sym.values.numel(), 48 * 16 * 16 / 4);
  EXPECT_EQ(sym.shape, (std::vector<std::int64_t>{12, 16, 16}));
  EXPECT_NEAR(sym.average_power(), 1.0, 1e-6);
  EXPECT_TRUE(torch::equal(sym.values, channel_encode(enc, x).values));

  const auto y = channel_decode(dec, awgn(sym, SnrDb{0.0}, 1), grid);
  EXPECT_EQ(y.values.sizes(), x.values.sizes());
  EXPECT_TRUE(torch::isfinite(y.values).all().item<bool>());

  auto bad = sym;
  bad.shape = {12, 8, 32};
  EXPECT_THROW(channel_decode(dec, bad, grid), ShapeError);
  EXPECT_THROW(channel_encode(enc, BEVFeatureMap{torch::full({48, 16, 16}, NAN), grid}), ValidationError);
}

TEST(ChannelCodec, FullSizeSymbolCount) {
  torch::manual_seed(7);
  ChannelEncoder enc(48, 8, 12);
  const auto sym = channel_encode(enc, BEVFeatureMap{torch::randn({48, 64, 64}), BevGridSpec{}});
  EXPECT_EQ(sym.values.numel(), 48 * 64 * 64 / 4);
}

TEST(BevCompressor, ReducesChannelsAtFullResolution) {
  torch::manual_seed(8);
  BevCompressor comp(48, 16);
  const BEVFeatureMap x{torch::randn({48, 64, 64}), BevGridSpec{}};
  const auto y = bev_compress(comp, x);
  EXPECT_EQ(y.values.sizes(), (std::vector<std::int64_t>{16, 64, 64}));
  EXPECT_TRUE(torch::equal(y.values, bev_compress(comp, x).values));
  EXPECT_TRUE(torch::isfinite(y.values).all().item<bool>());
  EXPECT_THROW(BevCompressor(16, 16), ShapeError);
}

}  // namespace
}  // namespace bevlink
