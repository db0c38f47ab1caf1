#pragma once

#include <torch/torch.h>

#include "bevlink/bev.hpp"
#include "bevlink/channel.hpp"

namespace bevlink {

/// Four 5x5 convolutions mapping the fused BEV map to `symbol_channels` x G x G channel symbols.
class ChannelEncoderImpl : public torch::nn::Module {
 public:
  ChannelEncoderImpl(int in_channels, int hidden_channels, int symbol_channels);
  /// [B, C, G, G] -> [B, S, G, G] (not yet power-normalized).
  torch::Tensor forward(const torch::Tensor& x);
  int symbol_channels() const { return symbol_channels_; }

 private:
  torch::nn::Sequential net_{nullptr};
  int symbol_channels_;
};
TORCH_MODULE(ChannelEncoder);

/// Mirror of the channel encoder: received symbols back to the pre-channel feature shape.
class ChannelDecoderImpl : public torch::nn::Module {
 public:
  ChannelDecoderImpl(int symbol_channels, int hidden_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& y);
  int symbol_channels() const { return symbol_channels_; }
  int out_channels() const { return out_channels_; }

 private:
  torch::nn::Sequential net_{nullptr};
  int symbol_channels_;
  int out_channels_;
};
TORCH_MODULE(ChannelDecoder);

/// Server-side channel-reducing convolution, C_in -> C_out at full resolution.
class BevCompressorImpl : public torch::nn::Module {
 public:
  BevCompressorImpl(int in_channels, int out_channels);
  torch::Tensor forward(const torch::Tensor& x);
  int out_channels() const { return out_channels_; }

 private:
  torch::nn::Sequential net_{nullptr};
  int out_channels_;
};
TORCH_MODULE(BevCompressor);

/// Encode, flatten and power-normalize one map (inference mode).
ChannelSymbols channel_encode(ChannelEncoder& encoder, const BEVFeatureMap& bev);

/// Decode a received block; its shape metadata must be [S, G, G] for this decoder and grid.
BEVFeatureMap channel_decode(ChannelDecoder& decoder, const ChannelSymbols& received, const BevGridSpec& grid);

BEVFeatureMap bev_compress(BevCompressor& compressor, const BEVFeatureMap& features);

}  // namespace bevlink
