#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bevlink/config.hpp"
#include "bevlink/pipeline.hpp"

namespace bevlink {

/// Training log of one stage.
struct StageMetrics {
  int stage = 0;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_val_iou;
  double lossless_val_iou = 0.0;                   ///< stage 1 and 2
  std::vector<std::pair<double, double>> snr_val_iou;  ///< stage 2: (snr_db, val IoU)

  bool operator==(const StageMetrics&) const = default;
};

struct CheckpointTensor {
  std::string name;
  Side side = Side::server;
  torch::Tensor tensor;
};

struct Checkpoint {
  int stage = 0;
  ExperimentConfig config;
  std::uint64_t seed = 0;
  std::vector<StageMetrics> metrics;  ///< one entry per completed stage, in order
  std::vector<CheckpointTensor> tensors;

  /// Short identifier derived from stage, config hash and seed.
  std::string id() const;
  std::vector<NamedTensor> named_tensors() const;
  const StageMetrics& stage_metrics(int stage) const;
};

/// Module prefixes trained up to and including `stage`.
std::vector<std::string> modules_for_stage(int stage);

/// Snapshot of the networks trained so far, with side tags.
Checkpoint capture_checkpoint(const Networks& nets, int stage, std::uint64_t seed, std::vector<StageMetrics> metrics);

/// Builds networks from the checkpoint's config and loads its weights.
Networks restore_networks(const Checkpoint& ckpt);

/// File layout: "BVCK", u32 version, u64 header length, JSON header, then raw little-endian
/// tensor data at the offsets listed in the header.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);

/// Throws IngestionError on malformed files; the embedded config is re-validated.
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace bevlink
