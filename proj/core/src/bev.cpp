#include "bevlink/bev.hpp"

#include "bevlink/errors.hpp"

namespace bevlink {

void BEVFeatureMap::validate() const {
  if (!values.defined() || values.dim() != 3) throw ShapeError("BEV feature map must be a [C, G, G] tensor");
  if (values.size(0) <= 0 || values.size(1) != grid.size || values.size(2) != grid.size)
    throw ShapeError("BEV feature map shape does not match its grid");
  if (!torch::isfinite(values).all().item<bool>()) throw ValidationError("BEV feature map has non-finite values");
}

FusionStrategy parse_fusion_strategy(const std::string& name) {
  if (name == "addition") return FusionStrategy::addition;
  if (name == "averaging") return FusionStrategy::averaging;
  if (name == "concatenation") return FusionStrategy::concatenation;
  if (name == "ensemble") return FusionStrategy::ensemble;
  if (name == "mixture-of-experts") return FusionStrategy::mixture_of_experts;
  throw ValidationError("unknown fusion strategy '" + name + "'");
}

std::string to_string(FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::addition: return "addition";
    case FusionStrategy::averaging: return "averaging";
    case FusionStrategy::concatenation: return "concatenation";
    case FusionStrategy::ensemble: return "ensemble";
    case FusionStrategy::mixture_of_experts: return "mixture-of-experts";
  }
  return "?";
}

torch::Tensor fuse_tensors(const torch::Tensor& a, const torch::Tensor& b, FusionStrategy strategy) {
  if (a.dim() != b.dim() || (a.dim() == 4 && a.size(0) != b.size(0)) || a.size(-1) != b.size(-1) || a.size(-2) != b.size(-2))
    throw ShapeError("fusion operands differ in batch or spatial shape");
  const int channel_dim = a.dim() == 4 ? 1 : 0;
  switch (strategy) {
    case FusionStrategy::concatenation:
      return torch::cat({a, b}, channel_dim);
    case FusionStrategy::addition:
    case FusionStrategy::averaging:
      if (a.size(channel_dim) != b.size(channel_dim))
        throw ShapeError(to_string(strategy) + " fusion requires equal channel counts");
      return strategy == FusionStrategy::addition ? a + b : 0.5 * (a + b);
    case FusionStrategy::ensemble:
    case FusionStrategy::mixture_of_experts:
      throw UnimplementedError(to_string(strategy) + " fusion is not implemented");
  }
  throw ValidationError("invalid fusion strategy");
}

BEVFeatureMap fuse(const BEVFeatureMap& a, const BEVFeatureMap& b, FusionStrategy strategy) {
  if (!(a.grid == b.grid)) throw ShapeError("cannot fuse BEV maps defined on different grids");
  a.validate();
  b.validate();
  return BEVFeatureMap{fuse_tensors(a.values, b.values, strategy), a.grid};
}

}  // namespace bevlink
