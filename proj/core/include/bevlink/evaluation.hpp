#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "bevlink/checkpoint.hpp"
#include "bevlink/dataset_io.hpp"
#include "bevlink/pipeline.hpp"
#include "bevlink/segmentation.hpp"

namespace bevlink {

/// |pred >= threshold AND gt| / |pred >= threshold OR gt|, with gt binarized at its own threshold.
/// Two empty masks score 1.0. Throws ShapeError on grid mismatch.
double iou(const SegmentationMask& pred, const SegmentationMask& gt, double threshold = 0.5);

/// IoU of two boolean tensors of equal shape.
double iou_binary(const torch::Tensor& pred, const torch::Tensor& gt);

/// Per-item IoU of [B, G, G] probabilities against [B, G, G] {0, 1} ground truth.
std::vector<double> batch_iou(const torch::Tensor& probs, const torch::Tensor& gt, double threshold);

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;  ///< unbiased; zero with fewer than two samples
  std::size_t count = 0;
};
MeanVariance mean_variance(const std::vector<double>& values);

/// Seed for the channel noise of one frame; shared by all variants that transmit it.
std::uint64_t frame_noise_seed(std::uint64_t seed, const std::string& scene_id, int frame, double snr_db);

/// Decoded masks [count, G, G] for frames [0, count) of one sequence under a variant.
/// Frames are processed in fixed chunks so results do not depend on the caller.
DecodedMasks decode_sequence(Networks& nets, const PreparedSequence& sequence, int count, Variant variant, SnrDb snr,
                             int horizon, std::uint64_t seed);

struct EvalRequest {
  std::optional<double> snr_db;  ///< nullopt selects the lossless path
  bool use_diffusion = false;
  int horizon = 0;
  std::uint64_t seed = 0;
  double threshold = 0.5;
};

struct CheckpointEvaluation {
  MeanVariance overall;  ///< over all frames
  std::vector<std::pair<std::string, MeanVariance>> per_scene;
};

/// Full pipeline per frame t in [0, n - 1 - horizon], scored against ground truth at t + horizon.
CheckpointEvaluation evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& dataset, const EvalRequest& request);
CheckpointEvaluation evaluate_networks(Networks& nets, const std::vector<PreparedSequence>& sequences,
                                       const EvalRequest& request);

struct SweepRecord {
  std::string scene_id;
  double snr_db = 0.0;
  std::string variant;
  int seed = 0;
  int horizon = 0;
  double iou = 0.0;
  int frames = 0;
  int outage = 0;  ///< frames lost to digital outage (scored as IoU 0)
};

/// Before/after/ground-truth triplet for one frame, as 8-bit grayscale G x G images.
struct ScenePanel {
  std::string scene_id;
  double snr_db = 0.0;
  int frame = 0;
  int horizon = 0;
  int size = 0;
  std::vector<std::uint8_t> before;
  std::vector<std::uint8_t> after;
  std::vector<std::uint8_t> ground_truth;
};

struct SweepMetadata {
  std::string checkpoint_id;
  std::string config_hash;
  std::string timestamp;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  SweepMetadata metadata;
  std::vector<ScenePanel> panels;
};

struct SweepOptions {
  std::vector<double> snr_list{0.0, 5.0, 10.0, 15.0, 20.0};
  std::vector<std::string> variants{"lossless", "awgn", "awgn+diffusion", "digital"};
  int seeds = 3;
  std::vector<int> horizons{0};
  int jobs = 1;
  double threshold = 0.5;
  std::uint64_t base_seed = 0;
  bool collect_panels = true;
};

/// Evaluates every (scene, snr, variant, seed, horizon) cell. Records come back in a canonical
/// order regardless of `jobs`.
SweepResult snr_sweep(const Checkpoint& ckpt, const Dataset& dataset, const SweepOptions& options);
SweepResult snr_sweep(Networks& nets, const std::vector<PreparedSequence>& sequences, const SweepOptions& options);

}  // namespace bevlink
