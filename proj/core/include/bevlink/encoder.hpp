#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "bevlink/bev.hpp"
#include "bevlink/camera.hpp"
#include "bevlink/config.hpp"
#include "bevlink/scene.hpp"

namespace bevlink {

enum class BackboneKind { small_cnn, resnet101 };
BackboneKind parse_backbone(const std::string& name);

/// Per-view image feature extractor with output stride 8.
class ImageBackboneImpl : public torch::nn::Module {
 public:
  ImageBackboneImpl(BackboneKind kind, int out_channels);

  /// [N, 3, H, W] in [0, 1] -> [N, C, H/8, W/8].
  torch::Tensor forward(const torch::Tensor& images);

  static constexpr int stride = 8;
  int out_channels() const { return out_channels_; }

 private:
  int out_channels_;
  torch::nn::Sequential trunk_{nullptr};
};
TORCH_MODULE(ImageBackbone);

/// Stack K equally sized views into [K, 3, H, W]. Throws ShapeError on mismatched sizes.
torch::Tensor images_to_tensor(const std::vector<Image>& views);

/// Runs the backbone on every view in inference mode: [K, C, H/8, W/8].
torch::Tensor extract_image_features(ImageBackbone& backbone, const std::vector<Image>& views);

enum class OverlapMode { average, max };
OverlapMode parse_overlap(const std::string& name);

/// Where each BEV cell center (on the ground plane z = 0) lands in each view's feature map.
struct BevProjection {
  torch::Tensor sample_grid;  ///< [K, G, G, 2] normalized (x, y) for grid_sample(align_corners = true)
  torch::Tensor valid;        ///< [K, 1, G, G] 1 where the cell projects inside the view's image
};

BevProjection make_bev_projection(const CameraRig& rig, const BevGridSpec& grid, int feature_height,
                                  int feature_width, int stride);

/// Batched lifting of view features to BEV.
/// features [B, K, C, h, w], sample_grid [B, K, G, G, 2], valid [B, K, 1, G, G] -> [B, C, G, G].
/// Cells seen by no view are exactly zero.
torch::Tensor project_to_bev(const torch::Tensor& features, const torch::Tensor& sample_grid,
                             const torch::Tensor& valid, OverlapMode mode);

/// Single-frame convenience over the batched form: features [K, C, h, w].
BEVFeatureMap project_to_bev(const torch::Tensor& view_features, const CameraRig& rig, const BevGridSpec& grid,
                             int stride = ImageBackboneImpl::stride, OverlapMode mode = OverlapMode::average);

/// Bilinear sample of a [C, H, W] map at continuous feature coordinates (u along W, v along H).
torch::Tensor bilinear_sample(const torch::Tensor& feature, double u, double v);

/// Pillar scatter of radar returns: channels (log(1 + count), mean z, mean radial velocity).
struct PillarScatter {
  torch::Tensor pillars;    ///< [3, G, G]
  std::size_t ignored = 0;  ///< points outside the grid extent
};
PillarScatter scatter_radar_pillars(const std::vector<RadarPoint>& points, const BevGridSpec& grid);

class RadarPillarNetImpl : public torch::nn::Module {
 public:
  explicit RadarPillarNetImpl(int out_channels);
  torch::Tensor forward(const torch::Tensor& pillars);  ///< [B, 3, G, G] -> [B, C, G, G]

 private:
  torch::nn::Sequential net_{nullptr};
};
TORCH_MODULE(RadarPillarNet);

/// Pillar scatter followed by the learned convolution (inference mode).
BEVFeatureMap voxelize_radar(RadarPillarNet& net, const std::vector<RadarPoint>& points, const BevGridSpec& grid);

/// Camera + radar BEV encoder producing the fused map sent over the link.
class SemanticEncoderImpl : public torch::nn::Module {
 public:
  explicit SemanticEncoderImpl(const EncoderSettings& settings);

  torch::Tensor camera_bev(const torch::Tensor& images, const torch::Tensor& sample_grid, const torch::Tensor& valid);
  torch::Tensor radar_bev(const torch::Tensor& pillars);

  /// images [B, K, 3, H, W], pillars [B, 3, G, G] -> fused [B, C, G, G].
  torch::Tensor forward(const torch::Tensor& images, const torch::Tensor& pillars, const torch::Tensor& sample_grid,
                        const torch::Tensor& valid);

  int out_channels() const { return out_channels_; }
  FusionStrategy fusion() const { return fusion_; }

 private:
  ImageBackbone backbone_{nullptr};
  RadarPillarNet radar_{nullptr};
  FusionStrategy fusion_;
  OverlapMode overlap_;
  int out_channels_;
};
TORCH_MODULE(SemanticEncoder);

}  // namespace bevlink
