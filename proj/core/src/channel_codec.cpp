#include "bevlink/channel_codec.hpp"

#include "bevlink/errors.hpp"

namespace bevlink {

namespace nn = torch::nn;

namespace {

nn::Conv2d conv5(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 5).padding(2)); }

// Run `module` in eval mode without autograd, restoring its previous mode.
template <typename M, typename Fn>
auto inference(M& module, Fn&& fn) {
  torch::NoGradGuard no_grad;
  const bool was_training = module->is_training();
  module->eval();
  auto out = fn();
  if (was_training) module->train();
  return out;
}

}  // namespace

ChannelEncoderImpl::ChannelEncoderImpl(int in_channels, int hidden_channels, int symbol_channels)
    : symbol_channels_(symbol_channels) {
  net_ = register_module("net", nn::Sequential(conv5(in_channels, hidden_channels), nn::PReLU(),
                                               conv5(hidden_channels, hidden_channels), nn::PReLU(),
                                               conv5(hidden_channels, hidden_channels), nn::PReLU(),
                                               conv5(hidden_channels, symbol_channels)));
}

torch::Tensor ChannelEncoderImpl::forward(const torch::Tensor& x) { return net_->forward(x); }

ChannelDecoderImpl::ChannelDecoderImpl(int symbol_channels, int hidden_channels, int out_channels)
    : symbol_channels_(symbol_channels), out_channels_(out_channels) {
  net_ = register_module("net", nn::Sequential(conv5(symbol_channels, hidden_channels), nn::PReLU(),
                                               conv5(hidden_channels, hidden_channels), nn::PReLU(),
                                               conv5(hidden_channels, hidden_channels), nn::PReLU(),
                                               conv5(hidden_channels, out_channels)));
}

torch::Tensor ChannelDecoderImpl::forward(const torch::Tensor& y) { return net_->forward(y); }

BevCompressorImpl::BevCompressorImpl(int in_channels, int out_channels) : out_channels_(out_channels) {
  if (out_channels >= in_channels) throw ShapeError("BEV compressor must reduce the channel count");
  net_ = register_module("net", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)),
                                               nn::ReLU()));
}

torch::Tensor BevCompressorImpl::forward(const torch::Tensor& x) { return net_->forward(x); }

ChannelSymbols channel_encode(ChannelEncoder& encoder, const BEVFeatureMap& bev) {
  bev.validate();
  auto symbols = inference(encoder, [&] { return encoder->forward(bev.values.unsqueeze(0)).squeeze(0); });
  return power_normalize(symbols, symbols.sizes().vec());
}

BEVFeatureMap channel_decode(ChannelDecoder& decoder, const ChannelSymbols& received, const BevGridSpec& grid) {
  const std::vector<std::int64_t> expected{decoder->symbol_channels(), grid.size, grid.size};
  if (received.shape != expected) throw ShapeError("received symbol block shape does not match the channel decoder");
  if (received.values.numel() != expected[0] * expected[1] * expected[2])
    throw ShapeError("received symbol count does not match its shape metadata");
  auto y = received.values.to(torch::kFloat32).view({1, expected[0], expected[1], expected[2]});
  auto out = inference(decoder, [&] { return decoder->forward(y).squeeze(0); });
  return BEVFeatureMap{out, grid};
}

BEVFeatureMap bev_compress(BevCompressor& compressor, const BEVFeatureMap& features) {
  features.validate();
  auto out = inference(compressor, [&] { return compressor->forward(features.values.unsqueeze(0)).squeeze(0); });
  return BEVFeatureMap{out, features.grid};
}

}  // namespace bevlink
