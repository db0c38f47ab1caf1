#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace bevlink {

/// Signal-to-noise ratio in decibels for unit-power symbols.
struct SnrDb {
  double value = 0.0;
  /// Per-real-symbol noise variance 10^(-snr/10).
  double noise_variance() const { return std::pow(10.0, -value / 10.0); }
};

/// Flat block of real channel symbols plus the shape needed to un-flatten it.
struct ChannelSymbols {
  torch::Tensor values;              ///< 1-D float64
  std::vector<std::int64_t> shape;   ///< product equals values.numel()

  double average_power() const;
};

/// CPU generator seeded deterministically.
torch::Generator make_generator(std::uint64_t seed);

/// Scales `symbols` by sqrt(n / ||symbols||^2) so the mean square is 1.
/// Throws DegenerateInputError for an all-zero (or non-finite) block.
ChannelSymbols power_normalize(const torch::Tensor& symbols, std::vector<std::int64_t> shape = {});

/// Adds iid N(0, 10^(-snr/10)) noise. Deterministic given `seed`.
ChannelSymbols awgn(const ChannelSymbols& symbols, SnrDb snr, std::uint64_t seed);

/// Differentiable per-sample power normalization of a [B, ...] tensor.
torch::Tensor normalize_power_batch(const torch::Tensor& x);

/// Adds Gaussian noise with variance 10^(-snr/10) using the given generator.
torch::Tensor add_awgn(const torch::Tensor& x, SnrDb snr, torch::Generator& gen);

}  // namespace bevlink
