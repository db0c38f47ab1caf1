#include "bevlink/training.hpp"

#include <set>

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "bevlink/rng.hpp"
#include "test_support.hpp"

namespace bevlink {
namespace {

using testing::tiny_config;
using testing::tiny_dataset_options;

class TrainingChain : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dataset_ = new Dataset(generate_dataset(tiny_dataset_options(3, 4)));
    auto cfg = tiny_config();
    cfg.train.epochs_stage1 = 6;
    config_ = new ExperimentConfig(cfg);
    stage1_ = new Checkpoint(train(1, cfg, *dataset_, nullptr, 11));
    stage2_ = new Checkpoint(train(2, cfg, *dataset_, stage1_, 11));
    stage3_ = new Checkpoint(train(3, cfg, *dataset_, stage2_, 11));
  }
  static void TearDownTestSuite() {
    delete stage3_;
    delete stage2_;
    delete stage1_;
    delete config_;
    delete dataset_;
  }

  static const torch::Tensor& tensor(const Checkpoint& c, const std::string& name) {
    for (const auto& t : c.tensors)
      if (t.name == name) return t.tensor;
    throw std::runtime_error("missing tensor " + name);
  }

  static Dataset* dataset_;
  static ExperimentConfig* config_;
  static Checkpoint* stage1_;
  static Checkpoint* stage2_;
  static Checkpoint* stage3_;
};

Dataset* TrainingChain::dataset_ = nullptr;
ExperimentConfig* TrainingChain::config_ = nullptr;
Checkpoint* TrainingChain::stage1_ = nullptr;
Checkpoint* TrainingChain::stage2_ = nullptr;
Checkpoint* TrainingChain::stage3_ = nullptr;

TEST_F(TrainingChain, StageOneLossDecreases) {
  const auto& m = stage1_->stage_metrics(1);
  ASSERT_EQ(m.epoch_loss.size(), 6U);
  EXPECT_LT(m.epoch_loss.back(), m.epoch_loss.front());
  EXPECT_EQ(m.epoch_val_iou.size(), 6U);
}

TEST_F(TrainingChain, LaterStagesCarryEarlierWeightsUnchanged) {
  for (const auto& t : stage1_->tensors) EXPECT_TRUE(torch::equal(t.tensor, tensor(*stage2_, t.name))) << t.name;
  for (const auto& t : stage2_->tensors) EXPECT_TRUE(torch::equal(t.tensor, tensor(*stage3_, t.name))) << t.name;
  EXPECT_EQ(stage3_->metrics.size(), 3U);
  EXPECT_EQ(stage3_->stage_metrics(2), stage2_->stage_metrics(2));
}

TEST_F(TrainingChain, StageThreeReproducesRecordedStageTwoMetrics) {
  auto nets = restore_networks(*stage3_);
  const auto val = prepare_sequences(validation_split(*dataset_, config_->train.val_frames));
  StageMetrics again;
  record_link_metrics(nets, val, derive_seed(11, "validation"), again);
  const auto& recorded = stage3_->stage_metrics(2);
  EXPECT_EQ(again.lossless_val_iou, recorded.lossless_val_iou);
  EXPECT_EQ(again.snr_val_iou, recorded.snr_val_iou);
}

TEST_F(TrainingChain, VehicleSideIsExactlyEncoderAndChannelEncoder) {
  std::set<std::string> vehicle, server;
  for (const auto& t : stage3_->tensors) {
    const auto prefix = t.name.substr(0, t.name.find('.'));
    (t.side == Side::vehicle ? vehicle : server).insert(prefix);
  }
  EXPECT_EQ(vehicle, (std::set<std::string>{"encoder", "channel_encoder"}));
  EXPECT_EQ(server, (std::set<std::string>{"channel_decoder", "compressor", "seg_decoder", "denoiser"}));
}

TEST_F(TrainingChain, SameSeedGivesBitwiseIdenticalWeights) {
  const auto again = train(2, *config_, *dataset_, stage1_, 11);
  ASSERT_EQ(again.tensors.size(), stage2_->tensors.size());
  for (std::size_t i = 0; i < again.tensors.size(); ++i)
    EXPECT_TRUE(torch::equal(again.tensors[i].tensor, stage2_->tensors[i].tensor)) << again.tensors[i].name;
  EXPECT_EQ(again.metrics, stage2_->metrics);
}

TEST_F(TrainingChain, PrerequisitesAreEnforced) {
  EXPECT_THROW(train(2, *config_, *dataset_, nullptr, 1), PrerequisiteError);
  EXPECT_THROW(train(3, *config_, *dataset_, stage1_, 1), PrerequisiteError);
  EXPECT_THROW(train(2, *config_, *dataset_, stage2_, 1), PrerequisiteError);

  auto wider = *config_;
  wider.channel.hidden_channels = 16;
  EXPECT_THROW(train(2, wider, *dataset_, stage1_, 1), ValidationError);

  auto finetune = *config_;
  finetune.train.finetune_all = true;
  EXPECT_THROW(train(3, finetune, *dataset_, stage2_, 1), ConfigError);

  auto big_grid = *config_;
  big_grid.data.grid_size = 32;
  EXPECT_THROW(train(1, big_grid, *dataset_, nullptr, 1), ValidationError);
}

TEST_F(TrainingChain, FinetuneAllUpdatesEarlierWeights) {
  auto cfg = *config_;
  cfg.train.finetune_all = true;
  cfg.train.epochs_stage2 = 1;
  const auto tuned = train(2, cfg, *dataset_, stage1_, 11);
  bool changed = false;
  for (const auto& t : stage1_->tensors)
    if (t.name.rfind("encoder.", 0) == 0 && t.tensor.is_floating_point())
      changed |= !torch::equal(t.tensor, tensor(tuned, t.name));
  EXPECT_TRUE(changed);
}

TEST(ValidationSplit, PrefersValThenTestWithWholeSequences) {
  auto ds = generate_dataset(tiny_dataset_options(5, 4));
  const auto test = ds.subset("test");
  ASSERT_GE(test.sequences.size(), 2U);
  auto v = validation_split(ds, 6);
  ASSERT_EQ(v.sequences.size(), 2U);
  EXPECT_EQ(v.sequences[0].scene_id, test.sequences[0].scene_id);
  EXPECT_EQ(v.splits[0], "test");
  ds.splits[0] = "val";
  v = validation_split(ds, 1);
  ASSERT_EQ(v.sequences.size(), 1U);
  EXPECT_EQ(v.sequences[0].scene_id, ds.sequences[0].scene_id);
}

}  // namespace
}  // namespace bevlink
