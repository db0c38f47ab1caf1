#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "bevlink/config.hpp"
#include "bevlink/segmentation.hpp"

namespace bevlink {

inline constexpr int kMaxHorizon = 3;

/// Linear beta schedule. Index t runs 1..steps; alpha_bar(0) is 1.
struct DiffusionSchedule {
  int steps = 0;
  std::vector<double> betas;       ///< betas[t - 1]
  std::vector<double> alphas_bar;  ///< alphas_bar[t - 1]

  /// Reference betas (defined for 1000 steps) are rescaled by 1000/steps.
  static DiffusionSchedule linear(int steps, double beta_min = 1e-4, double beta_max = 0.02);
  static DiffusionSchedule from_settings(const DiffusionSettings& settings);

  double beta(int t) const { return betas.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alphas_bar.at(static_cast<std::size_t>(t - 1)); }
  void validate() const;
};

/// Throws ValidationError unless 0 <= horizon <= 3.
void validate_horizon(int horizon);

/// Maps probabilities in [0, 1] to [-1, 1] and back (with clamping).
torch::Tensor to_signed(const torch::Tensor& probs);
torch::Tensor to_probability(const torch::Tensor& x);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, with eps drawn from `seed`. x0 is in [-1, 1].
torch::Tensor diffusion_forward(const torch::Tensor& x0, int t, const DiffusionSchedule& schedule, std::uint64_t seed);
torch::Tensor diffusion_forward(const SegmentationMask& mask, int t, const DiffusionSchedule& schedule,
                                std::uint64_t seed);

/// Sinusoidal embedding of real positions: [N] -> [N, dim].
torch::Tensor sinusoidal_embedding(const torch::Tensor& positions, int dim);

/// U-Net clean-mask predictor over [noisy mask, condition] with timestep and horizon embeddings.
class DenoiserImpl : public torch::nn::Module {
 public:
  explicit DenoiserImpl(int base_channels = 16);
  /// x_t, condition: [B, 1, G, G]; t, horizon: [B] int64.
  /// Returns the predicted clean mask x_0 [B, 1, G, G] in signed units.
  torch::Tensor forward(const torch::Tensor& x_t, const torch::Tensor& condition, const torch::Tensor& t,
                        const torch::Tensor& horizon);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
  int base_;
};
TORCH_MODULE(Denoiser);

/// Clean-mask (x_0) prediction MSE on a batch: x0 and condition in [-1, 1], timesteps drawn uniformly from `gen`.
torch::Tensor diffusion_loss(Denoiser& denoiser, const torch::Tensor& x0, const torch::Tensor& condition,
                             const torch::Tensor& horizon, const DiffusionSchedule& schedule, torch::Generator& gen);

/// Ancestral sampling for a batch. condition: [B, G, G] probabilities; one seed per item, so each
/// item's result depends only on its own seed. Returns [B, G, G] probabilities in [0, 1].
torch::Tensor sample_masks(Denoiser& denoiser, const torch::Tensor& condition, const std::vector<int>& horizons,
                           const DiffusionSchedule& schedule, const std::vector<std::uint64_t>& seeds);

/// Refines (horizon 0) or forecasts (horizon 1..3) a mask from a decoded condition.
SegmentationMask diffusion_refine(Denoiser& denoiser, const SegmentationMask& condition, int horizon,
                                  const DiffusionSchedule& schedule, std::uint64_t seed);

/// Forecast at horizon 1..3; horizon 0 is routed to diffusion_refine, larger horizons are rejected.
SegmentationMask predict_future(Denoiser& denoiser, const SegmentationMask& condition, int horizon,
                                const DiffusionSchedule& schedule, std::uint64_t seed);

}  // namespace bevlink
