#include "bevlink/checkpoint.hpp"

#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "test_support.hpp"

namespace bevlink {
namespace {

using testing::TempDir;
using testing::tiny_config;

StageMetrics metrics_for(int stage) {
  StageMetrics m;
  m.stage = stage;
  m.epoch_loss = {0.5, 0.25};
  m.epoch_val_iou = {0.1, 0.2};
  m.lossless_val_iou = 0.2;
  if (stage == 2) m.snr_val_iou = {{0.0, 0.1}, {20.0, 0.19}};
  return m;
}

TEST(SideTags, VehicleSideIsEncoderAndChannelEncoder) {
  EXPECT_EQ(side_of("encoder.backbone.trunk.0.weight"), Side::vehicle);
  EXPECT_EQ(side_of("channel_encoder.net.0.weight"), Side::vehicle);
  EXPECT_EQ(side_of("channel_decoder.net.0.weight"), Side::server);
  EXPECT_EQ(side_of("compressor.net.0.weight"), Side::server);
  EXPECT_EQ(side_of("seg_decoder.head.weight"), Side::server);
  EXPECT_EQ(side_of("denoiser.in_conv.weight"), Side::server);
  EXPECT_EQ(parse_side(to_string(Side::vehicle)), Side::vehicle);
}

TEST(ModulesForStage, GrowByStage) {
  EXPECT_EQ(modules_for_stage(1), (std::vector<std::string>{"encoder", "compressor", "seg_decoder"}));
  EXPECT_EQ(modules_for_stage(2).size(), 5U);
  EXPECT_EQ(modules_for_stage(3).size(), 6U);
  EXPECT_THROW(modules_for_stage(4), ValidationError);
}

TEST(Checkpoint, CaptureTagsEveryTensorAndCoversOnlyTrainedModules) {
  Networks nets(tiny_config(), 1);
  const auto ckpt = capture_checkpoint(nets, 2, 1, {metrics_for(1), metrics_for(2)});
  std::set<std::string> vehicle_modules;
  for (const auto& t : ckpt.tensors) {
    EXPECT_EQ(t.side, side_of(t.name));
    EXPECT_NE(t.name.rfind("denoiser.", 0), 0U) << t.name;
    if (t.side == Side::vehicle) vehicle_modules.insert(t.name.substr(0, t.name.find('.')));
  }
  EXPECT_EQ(vehicle_modules, (std::set<std::string>{"encoder", "channel_encoder"}));
  EXPECT_EQ(ckpt.id(), "stage2-" + tiny_config().hash() + "-1");
  EXPECT_EQ(ckpt.stage_metrics(2), metrics_for(2));
  EXPECT_THROW(ckpt.stage_metrics(3), PrerequisiteError);
}

TEST(Checkpoint, SaveLoadRoundTripAndRestore) {
  TempDir dir;
  Networks nets(tiny_config(), 2);
  const auto ckpt = capture_checkpoint(nets, 3, 2, {metrics_for(1), metrics_for(2), metrics_for(3)});
  save_checkpoint(ckpt, dir / "c.ckpt");
  const auto back = load_checkpoint(dir / "c.ckpt");
  EXPECT_EQ(back.stage, 3);
  EXPECT_EQ(back.seed, 2U);
  EXPECT_EQ(back.config, ckpt.config);
  EXPECT_EQ(back.metrics, ckpt.metrics);
  ASSERT_EQ(back.tensors.size(), ckpt.tensors.size());
  for (std::size_t i = 0; i < back.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ckpt.tensors[i].name);
    EXPECT_EQ(back.tensors[i].side, ckpt.tensors[i].side);
    EXPECT_TRUE(torch::equal(back.tensors[i].tensor, ckpt.tensors[i].tensor)) << back.tensors[i].name;
  }

  // A differently seeded network restored from the file reproduces the original state.
  auto restored = restore_networks(back);
  const auto a = nets.state(), b = restored.state();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a[i].tensor, b[i].tensor)) << a[i].name;
}

TEST(Checkpoint, LoadStateRejectsUnknownNamesAndShapes) {
  Networks nets(tiny_config(), 3);
  EXPECT_THROW(nets.load_state({{"encoder.nope", torch::zeros({1})}}), ShapeError);
  auto state = nets.state();
  state.front().tensor = torch::zeros({1, 2, 3});
  EXPECT_THROW(nets.load_state({state.front()}), ShapeError);
}

TEST(Checkpoint, MalformedFilesAreIngestionErrors) {
  TempDir dir;
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IngestionError);
  { std::ofstream(dir / "bad.ckpt") << "NOPE0000"; }
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), IngestionError);

  Networks nets(tiny_config(), 4);
  save_checkpoint(capture_checkpoint(nets, 1, 4, {metrics_for(1)}), dir / "ok.ckpt");
  const auto size = std::filesystem::file_size(dir / "ok.ckpt");
  std::filesystem::resize_file(dir / "ok.ckpt", size - 16);
  EXPECT_THROW(load_checkpoint(dir / "ok.ckpt"), IngestionError);
}

}  // namespace
}  // namespace bevlink
