#include "bevlink/config.hpp"

#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "test_support.hpp"

namespace bevlink {
namespace {

std::string config_error_key(const std::string& text) {
  try {
    validate_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

TEST(ValidateConfig, EmptyDocumentGivesDefaults) {
  const auto c = validate_config("");
  EXPECT_EQ(c, ExperimentConfig{});
  EXPECT_EQ(c.data.grid_size, 64);
  EXPECT_EQ(c.diffusion.steps, 100);
  EXPECT_EQ(c.eval.snr_list, (std::vector<double>{0, 5, 10, 15, 20}));
}

TEST(ValidateConfig, TypeErrorNamesTheKey) {
  EXPECT_EQ(config_error_key("[channel]\nsnr_db = high\n"), "channel.snr_db");
  EXPECT_EQ(config_error_key("[data]\ngrid_size = 12.5\n"), "data.grid_size");
  EXPECT_EQ(config_error_key("[train]\nfinetune_all = maybe\n"), "train.finetune_all");
}

TEST(ValidateConfig, RejectsUnknownKeysAndSections) {
  EXPECT_EQ(config_error_key("[channel]\nsnr = 3\n"), "channel.snr");
  EXPECT_EQ(config_error_key("[optimizer]\nlr = 3\n"), "optimizer");
}

TEST(ValidateConfig, RejectsOutOfRangeValues) {
  EXPECT_EQ(config_error_key("[data]\ngrid_size = 30\n"), "data.grid_size");
  EXPECT_EQ(config_error_key("[data]\nframes_per_scene = 3\n"), "data.frames_per_scene");
  EXPECT_EQ(config_error_key("[channel]\nratio = 0.3\n"), "channel.ratio");
  EXPECT_EQ(config_error_key("[channel]\ncompressed_channels = 48\n"), "channel.compressed_channels");
  EXPECT_EQ(config_error_key("[diffusion]\nsteps = 10\n"), "diffusion.beta_max");
  EXPECT_EQ(config_error_key("[diffusion]\nhorizons = 0,4\n"), "diffusion.horizons");
  EXPECT_EQ(config_error_key("[eval]\nvariants = lossless,rayleigh\n"), "eval.variants");
  EXPECT_EQ(config_error_key("[encoder]\nfusion = addition\n"), "encoder.radar_channels");
  EXPECT_EQ(config_error_key("[encoder]\nfusion = blend\n"), "encoder.fusion");
}

TEST(ValidateConfig, HashIsDeterministicAndSensitive) {
  const std::string doc = "[channel]\nsnr_db = 5\n";
  EXPECT_EQ(validate_config(doc).hash(), validate_config(doc).hash());
  EXPECT_NE(validate_config(doc).hash(), validate_config("").hash());
  EXPECT_EQ(validate_config("# note\n[channel]\nsnr_db = 5.0\n").hash(), validate_config(doc).hash());
}

// Random valid configs survive a text round trip and re-validate identically.
TEST(ValidateConfig, SnapshotRoundTripProperty) {
  std::mt19937_64 rng(17);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int trial = 0; trial < 200; ++trial) {
    ExperimentConfig c;
    c.data.grid_size = 4 * pick(2, 32);
    c.data.extent_m = 0.5 * pick(1, 200);
    c.data.image_size = 8 * pick(2, 32);
    c.data.num_views = pick(1, 12);
    c.encoder.image_channels = 4 * pick(1, 16);
    c.encoder.radar_channels = 4 * pick(1, 16);
    c.encoder.overlap = pick(0, 1) ? "average" : "max";
    c.channel.ratio = 0.25 * pick(1, 4);
    c.channel.snr_db = std::uniform_real_distribution<double>(-10, 30)(rng);
    c.channel.compressed_channels = pick(1, c.encoder.image_channels + c.encoder.radar_channels - 1);
    c.diffusion.steps = pick(25, 400);
    c.diffusion.base_channels = 8 * pick(1, 8);
    c.diffusion.horizons = {pick(0, 3)};
    c.train.lr = std::uniform_real_distribution<double>(1e-5, 1e-2)(rng);
    c.train.finetune_all = pick(0, 1) == 1;
    c.eval.snr_list = {static_cast<double>(pick(-5, 0)), 7.25, 1e-3};
    c.eval.variants = {"digital", "lossless"};
    const auto back = validate_config(c.to_text());
    ASSERT_EQ(back, c) << c.to_text();
    ASSERT_EQ(back.hash(), c.hash());
  }
}

TEST(ParseLists, ParsesAndRejects) {
  EXPECT_EQ(parse_double_list("0, 5,10.5"), (std::vector<double>{0, 5, 10.5}));
  EXPECT_EQ(parse_int_list("1,2,3"), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(parse_string_list("a, b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_THROW(parse_double_list("1,x"), ValidationError);
  EXPECT_THROW(parse_int_list("1.5"), ValidationError);
  EXPECT_THROW(parse_string_list("a,,b"), ValidationError);
}

TEST(LoadConfig, ReadsFileAndReportsMissingFile) {
  testing::TempDir dir;
  EXPECT_THROW(load_config(dir / "nope.ini"), ConfigError);
  { std::ofstream(dir / "c.ini") << testing::kTinyConfigText; }
  EXPECT_EQ(load_config(dir / "c.ini"), testing::tiny_config());
}

}  // namespace
}  // namespace bevlink
