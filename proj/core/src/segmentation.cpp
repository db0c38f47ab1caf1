#include "bevlink/segmentation.hpp"

#include "bevlink/errors.hpp"

namespace bevlink {

namespace nn = torch::nn;

torch::Tensor SegmentationMask::binary() const { return values >= threshold; }

void SegmentationMask::validate() const {
  if (!values.defined() || values.dim() != 2 || values.size(0) != grid.size || values.size(1) != grid.size)
    throw ShapeError("segmentation mask must be [G, G] for its grid");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("mask threshold must lie in (0, 1)");
  if (values.numel() > 0) {
    const auto [lo, hi] = torch::aminmax(values);
    if (!(lo.item<double>() >= 0.0 && hi.item<double>() <= 1.0))
      throw ValidationError("mask probabilities must lie in [0, 1]");
  }
}

SegmentationMask SegmentationMask::from_occupancy(const OccupancyGrid& occupancy, const BevGridSpec& grid) {
  if (occupancy.size != grid.size) throw ShapeError("occupancy grid size does not match the grid spec");
  auto values = torch::empty({grid.size, grid.size}, torch::kFloat32);
  float* p = values.data_ptr<float>();
  for (std::size_t i = 0; i < occupancy.cells.size(); ++i) p[i] = occupancy.cells[i] ? 1.0F : 0.0F;
  return SegmentationMask{values, grid};
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
  bn1_ = register_module("bn1", nn::BatchNorm2d(channels));
  conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
  bn2_ = register_module("bn2", nn::BatchNorm2d(channels));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1_(conv1_(x)));
  return torch::relu(x + bn2_(conv2_(y)));
}

SegmentationDecoderImpl::SegmentationDecoderImpl(int in_channels, int width, int blocks) : in_channels_(in_channels) {
  stem_ = register_module("stem", nn::Conv2d(nn::Conv2dOptions(in_channels, width, 3).padding(1).bias(false)));
  stem_bn_ = register_module("stem_bn", nn::BatchNorm2d(width));
  blocks_ = nn::Sequential();
  for (int i = 0; i < blocks; ++i) blocks_->push_back(ResidualBlock(width));
  register_module("blocks", blocks_);
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(width, 1, 1)));
}

torch::Tensor SegmentationDecoderImpl::forward(const torch::Tensor& features) {
  if (features.dim() != 4 || features.size(1) != in_channels_)
    throw ShapeError("segmentation decoder expects [B, " + std::to_string(in_channels_) + ", G, G]");
  return head_(blocks_->forward(torch::relu(stem_bn_(stem_(features)))));
}

SegmentationMask decode_segmentation(SegmentationDecoder& decoder, const BEVFeatureMap& features,
                                     const BevGridSpec& grid) {
  features.validate();
  if (!(features.grid == grid)) throw ShapeError("feature map grid does not match the target grid");
  torch::NoGradGuard no_grad;
  const bool was_training = decoder->is_training();
  decoder->eval();
  auto probs = torch::sigmoid(decoder->forward(features.values.unsqueeze(0))).squeeze(0).squeeze(0);
  if (was_training) decoder->train();
  return SegmentationMask{probs.contiguous(), grid};
}

}  // namespace bevlink
