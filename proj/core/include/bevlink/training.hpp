#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bevlink/checkpoint.hpp"
#include "bevlink/config.hpp"
#include "bevlink/dataset_io.hpp"
#include "bevlink/pipeline.hpp"

namespace bevlink {

using ProgressFn = std::function<void(const std::string&)>;

/// Sequences used for validation: the "val" split when present, otherwise "test",
/// truncated to whole sequences covering at least `val_frames` frames.
Dataset validation_split(const Dataset& dataset, int val_frames);

/// Stage-2 validation metrics: lossless IoU and IoU at every configured sweep SNR.
void record_link_metrics(Networks& nets, const std::vector<PreparedSequence>& val, std::uint64_t seed,
                         StageMetrics& metrics);

/// Runs one training stage.
///   stage 1: encoder + compressor + segmentation decoder, no channel, BCE loss.
///   stage 2: channel encoder/decoder around AWGN with SNR drawn per batch; earlier weights frozen
///            unless train.finetune_all is set.
///   stage 3: diffusion denoiser on (decoded condition at t, ground truth at t + h); everything else frozen.
/// Stage N > 1 requires `prev` to be a stage N - 1 checkpoint with the same network shapes.
/// Runs single-threaded, so identical inputs give bitwise-identical weights.
Checkpoint train(int stage, const ExperimentConfig& config, const Dataset& dataset, const Checkpoint* prev,
                 std::uint64_t seed, const ProgressFn& progress = {});

/// True when two configs build identically shaped networks for every module trained
/// up to and including `through_stage`.
bool same_network_shapes(const ExperimentConfig& a, const ExperimentConfig& b, int through_stage = 3);

}  // namespace bevlink
