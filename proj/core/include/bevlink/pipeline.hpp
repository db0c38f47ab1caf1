#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "bevlink/channel.hpp"
#include "bevlink/channel_codec.hpp"
#include "bevlink/config.hpp"
#include "bevlink/dataset_io.hpp"
#include "bevlink/diffusion.hpp"
#include "bevlink/encoder.hpp"
#include "bevlink/segmentation.hpp"

namespace bevlink {

/// Which end of the simulated link a parameter lives on.
enum class Side { vehicle, server };
std::string to_string(Side side);
Side parse_side(const std::string& name);

/// Vehicle side is the fusion encoder and the channel encoder; everything else runs on the server.
Side side_of(const std::string& tensor_name);

struct NamedTensor {
  std::string name;
  torch::Tensor tensor;
};

/// Every network in the pipeline, built from one config.
class Networks {
 public:
  /// Initializes weights from `seed` (through the global torch generator).
  Networks(const ExperimentConfig& config, std::uint64_t seed);

  const ExperimentConfig& config() const { return config_; }
  const DiffusionSchedule& schedule() const { return schedule_; }

  SemanticEncoder encoder{nullptr};
  ChannelEncoder channel_encoder{nullptr};
  ChannelDecoder channel_decoder{nullptr};
  BevCompressor compressor{nullptr};
  SegmentationDecoder seg_decoder{nullptr};
  Denoiser denoiser{nullptr};

  /// Parameters and buffers, prefixed by module ("encoder.", "channel_encoder.", ...), in a fixed order.
  std::vector<NamedTensor> state() const;

  /// Copies `tensors` into matching state entries. Throws ShapeError on unknown names or shapes.
  /// Returns the module prefixes that received at least one tensor.
  std::vector<std::string> load_state(const std::vector<NamedTensor>& tensors);

  std::vector<torch::nn::Module*> modules();
  torch::nn::Module& module(const std::string& prefix);
  static const std::vector<std::string>& module_names();

  void set_training(bool training);

 private:
  ExperimentConfig config_;
  DiffusionSchedule schedule_;
};

/// One frame in tensor form.
struct PreparedFrame {
  torch::Tensor images;   ///< uint8 [K, 3, H, W]
  torch::Tensor pillars;  ///< float [3, G, G]
  torch::Tensor gt;       ///< float [G, G] in {0, 1}
  std::vector<VehicleState> vehicles;
};

struct PreparedSequence {
  std::string scene_id;
  std::string style;
  BevGridSpec grid;
  double delta_t_s = 1.0;
  BevProjection projection;
  std::vector<PreparedFrame> frames;
};

PreparedSequence prepare_sequence(const SceneSequence& sequence);
std::vector<PreparedSequence> prepare_sequences(const Dataset& dataset);

struct FrameRef {
  const PreparedSequence* sequence = nullptr;
  int frame = 0;
};

struct FrameBatch {
  torch::Tensor images;       ///< float [B, K, 3, H, W] in [0, 1]
  torch::Tensor pillars;      ///< [B, 3, G, G]
  torch::Tensor sample_grid;  ///< [B, K, G, G, 2]
  torch::Tensor valid;        ///< [B, K, 1, G, G]
  torch::Tensor gt;           ///< [B, 1, G, G]
};

FrameBatch collate(const std::vector<FrameRef>& frames);

/// Ground truth of the referenced frames offset by `horizon`: [B, G, G].
torch::Tensor stack_ground_truth(const std::vector<FrameRef>& frames, int horizon = 0);

/// Fused BEV features [B, C, G, G] (autograd follows the encoder's mode).
torch::Tensor fuse_batch(Networks& nets, const FrameBatch& batch);

/// Server-side compressor + segmentation decoder: features -> logits [B, 1, G, G].
torch::Tensor server_logits(Networks& nets, const torch::Tensor& features);

/// Channel encoder, per-sample power normalization, AWGN, channel decoder.
torch::Tensor analog_link(Networks& nets, const torch::Tensor& features, SnrDb snr, torch::Generator& gen);

/// Same, with an independent noise generator per sample so each item depends only on its own seed.
torch::Tensor analog_link(Networks& nets, const torch::Tensor& features, SnrDb snr,
                          const std::vector<std::uint64_t>& seeds);

enum class Variant { lossless, awgn, awgn_diffusion, digital };
Variant parse_variant(const std::string& name);
std::string to_string(Variant variant);

struct DecodedMasks {
  torch::Tensor probs;               ///< [B, G, G]
  std::vector<std::uint8_t> outage;  ///< per item; only the digital variant sets it
};

/// Inference for one variant. `noise_seeds` drive the channel per item; `sample_seeds` drive
/// the diffusion sampler. The awgn and awgn+diffusion variants share channel noise for equal seeds.
DecodedMasks decode_masks(Networks& nets, const FrameBatch& batch, Variant variant, SnrDb snr, int horizon,
                          const std::vector<std::uint64_t>& noise_seeds,
                          const std::vector<std::uint64_t>& sample_seeds);

}  // namespace bevlink
