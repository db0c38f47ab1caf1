#pragma once

#include <torch/torch.h>

#include "bevlink/bev.hpp"
#include "bevlink/grid.hpp"
#include "bevlink/scene.hpp"

namespace bevlink {

/// Per-cell occupancy probabilities on a BEV grid.
struct SegmentationMask {
  torch::Tensor values;  ///< [G, G] float32 in [0, 1]
  BevGridSpec grid;
  double threshold = 0.5;

  /// Boolean [G, G] tensor of cells with probability >= threshold.
  torch::Tensor binary() const;
  void validate() const;

  static SegmentationMask from_occupancy(const OccupancyGrid& occupancy, const BevGridSpec& grid);
};

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Stem convolution, a stack of residual blocks and a 1x1 occupancy head.
class SegmentationDecoderImpl : public torch::nn::Module {
 public:
  SegmentationDecoderImpl(int in_channels, int width = 32, int blocks = 4);
  /// [B, C, G, G] -> occupancy logits [B, 1, G, G].
  torch::Tensor forward(const torch::Tensor& features);
  int in_channels() const { return in_channels_; }

 private:
  torch::nn::Conv2d stem_{nullptr};
  torch::nn::BatchNorm2d stem_bn_{nullptr};
  torch::nn::Sequential blocks_{nullptr};
  torch::nn::Conv2d head_{nullptr};
  int in_channels_;
};
TORCH_MODULE(SegmentationDecoder);

/// Inference-mode decode. `features.grid` must equal `grid`.
SegmentationMask decode_segmentation(SegmentationDecoder& decoder, const BEVFeatureMap& features,
                                     const BevGridSpec& grid);

}  // namespace bevlink
