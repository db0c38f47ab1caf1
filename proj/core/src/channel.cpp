#include "bevlink/channel.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "bevlink/errors.hpp"

namespace bevlink {

double ChannelSymbols::average_power() const { return values.to(torch::kFloat64).square().mean().item<double>(); }

torch::Generator make_generator(std::uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

ChannelSymbols power_normalize(const torch::Tensor& symbols, std::vector<std::int64_t> shape) {
  auto flat = symbols.detach().to(torch::kFloat64).flatten();
  const auto n = flat.numel();
  if (n == 0) throw DegenerateInputError("cannot power-normalize an empty symbol block");
  const double energy = flat.square().sum().item<double>();
  if (!(energy > 0.0) || !std::isfinite(energy))
    throw DegenerateInputError("cannot power-normalize an all-zero or non-finite symbol block");
  if (shape.empty()) shape = symbols.sizes().vec();
  return ChannelSymbols{flat * std::sqrt(static_cast<double>(n) / energy), std::move(shape)};
}

ChannelSymbols awgn(const ChannelSymbols& symbols, SnrDb snr, std::uint64_t seed) {
  auto gen = make_generator(seed);
  auto noise = torch::randn(symbols.values.sizes(), gen, torch::TensorOptions().dtype(torch::kFloat64));
  return ChannelSymbols{symbols.values + std::sqrt(snr.noise_variance()) * noise, symbols.shape};
}

torch::Tensor normalize_power_batch(const torch::Tensor& x) {
  auto flat = x.flatten(1);
  auto power = flat.square().mean(1, /*keepdim=*/true).clamp_min(1e-12);
  return (flat / power.sqrt()).view_as(x);
}

torch::Tensor add_awgn(const torch::Tensor& x, SnrDb snr, torch::Generator& gen) {
  auto noise = torch::randn(x.sizes(), gen, x.options().requires_grad(false));
  return x + std::sqrt(snr.noise_variance()) * noise;
}

}  // namespace bevlink
