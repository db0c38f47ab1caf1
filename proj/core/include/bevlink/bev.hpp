#pragma once

#include <string>

#include <torch/torch.h>

#include "bevlink/grid.hpp"

namespace bevlink {

/// C x G x G feature tensor expressed in a BEV grid.
struct BEVFeatureMap {
  torch::Tensor values;  ///< float32 [C, G, G]
  BevGridSpec grid;

  std::int64_t channels() const { return values.size(0); }

  /// Throws ShapeError on a malformed tensor and ValidationError on non-finite values.
  void validate() const;
};

enum class FusionStrategy { addition, averaging, concatenation, ensemble, mixture_of_experts };

FusionStrategy parse_fusion_strategy(const std::string& name);
std::string to_string(FusionStrategy strategy);

/// Fuses two maps that share a grid. Concatenation keeps (a, b) channel order.
BEVFeatureMap fuse(const BEVFeatureMap& a, const BEVFeatureMap& b, FusionStrategy strategy);

/// Batched fusion along dim 1 of [B, C, G, G] tensors.
torch::Tensor fuse_tensors(const torch::Tensor& a, const torch::Tensor& b, FusionStrategy strategy);

}  // namespace bevlink
