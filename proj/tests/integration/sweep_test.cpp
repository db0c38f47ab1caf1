#include <algorithm>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "bevlink/evaluation.hpp"
#include "bevlink/report.hpp"
#include "test_support.hpp"

namespace bevlink {
namespace {

using testing::tiny_config;
using testing::tiny_dataset_options;

class SweepFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    torch::set_num_threads(1);
    sequences_ = prepare_sequences(generate_dataset(tiny_dataset_options(4, 2)));
  }
  std::vector<PreparedSequence> sequences_;
};

SweepOptions small_options() {
  SweepOptions o;
  o.snr_list = {-5.0, 10.0, 30.0};
  o.variants = {"lossless", "awgn", "awgn+diffusion", "digital"};
  o.seeds = 2;
  o.horizons = {0, 1};
  o.base_seed = 9;
  return o;
}

TEST_F(SweepFixture, RecordsCoverTheFullCrossProductInCanonicalOrder) {
  Networks nets(tiny_config(), 1);
  const auto opt = small_options();
  const auto r = snr_sweep(nets, sequences_, opt);
  ASSERT_EQ(r.records.size(), 2U * 3U * 4U * 2U * 2U);
  std::set<std::tuple<std::string, double, std::string, int, int>> cells;
  for (const auto& rec : r.records) {
    cells.insert({rec.scene_id, rec.snr_db, rec.variant, rec.seed, rec.horizon});
    EXPECT_GE(rec.iou, 0.0);
    EXPECT_LE(rec.iou, 1.0);
    EXPECT_GT(rec.frames, 0);
    EXPECT_EQ(rec.frames, 5 - rec.horizon);
    if (rec.variant != "digital") EXPECT_EQ(rec.outage, 0);
    if (rec.outage == rec.frames) EXPECT_EQ(rec.iou, 0.0);
  }
  EXPECT_EQ(cells.size(), r.records.size());
  EXPECT_EQ(r.records.front().scene_id, sequences_.front().scene_id);
  EXPECT_EQ(r.records.front().variant, "lossless");
}

TEST_F(SweepFixture, LosslessRowsAreIdenticalAcrossSnr) {
  Networks nets(tiny_config(), 2);
  const auto r = snr_sweep(nets, sequences_, small_options());
  for (const auto& a : r.records) {
    if (a.variant != "lossless") continue;
    for (const auto& b : r.records)
      if (b.variant == "lossless" && b.scene_id == a.scene_id && b.horizon == a.horizon) EXPECT_EQ(a.iou, b.iou);
  }
}

TEST_F(SweepFixture, DigitalBaselineFailsAtLowSnrAndSurvivesHighSnr) {
  Networks nets(tiny_config(), 3);
  auto opt = small_options();
  opt.variants = {"digital"};
  opt.horizons = {0};
  const auto r = snr_sweep(nets, sequences_, opt);
  for (const auto& rec : r.records) {
    if (rec.snr_db == -5.0) EXPECT_EQ(rec.outage, rec.frames);
    if (rec.snr_db == 30.0) EXPECT_EQ(rec.outage, 0);
  }
}

TEST_F(SweepFixture, ResultsDoNotDependOnWorkerCount) {
  Networks nets(tiny_config(), 4);
  auto opt = small_options();
  opt.horizons = {0};
  opt.jobs = 1;
  const auto serial = snr_sweep(nets, sequences_, opt);
  opt.jobs = 3;
  const auto parallel = snr_sweep(nets, sequences_, opt);
  EXPECT_EQ(sweep_csv(serial), sweep_csv(parallel));
  ASSERT_EQ(serial.panels.size(), parallel.panels.size());
  for (std::size_t i = 0; i < serial.panels.size(); ++i) EXPECT_EQ(serial.panels[i].after, parallel.panels[i].after);
}

TEST_F(SweepFixture, RejectsEmptyInputs) {
  Networks nets(tiny_config(), 5);
  auto opt = small_options();
  opt.snr_list.clear();
  EXPECT_THROW(snr_sweep(nets, sequences_, opt), ValidationError);
  EXPECT_THROW(snr_sweep(nets, {}, small_options()), ValidationError);
  opt = small_options();
  opt.horizons = {5};
  EXPECT_THROW(snr_sweep(nets, sequences_, opt), ValidationError);
}

TEST_F(SweepFixture, CheckpointSweepRequiresStageForVariant) {
  Networks nets(tiny_config(), 6);
  const auto stage1 = capture_checkpoint(nets, 1, 6, {});
  const auto ds = generate_dataset(tiny_dataset_options(4, 2));
  auto opt = small_options();
  opt.variants = {"lossless"};
  EXPECT_NO_THROW(snr_sweep(stage1, ds, opt));
  opt.variants = {"awgn"};
  EXPECT_THROW(snr_sweep(stage1, ds, opt), PrerequisiteError);
  const auto stage2 = capture_checkpoint(nets, 2, 6, {});
  opt.variants = {"awgn+diffusion"};
  EXPECT_THROW(snr_sweep(stage2, ds, opt), PrerequisiteError);
}

}  // namespace
}  // namespace bevlink
