#include "bevlink/encoder.hpp"

#include <cmath>

#include "bevlink/errors.hpp"

namespace bevlink {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

BackboneKind parse_backbone(const std::string& name) {
  if (name == "small-cnn") return BackboneKind::small_cnn;
  if (name == "resnet101") return BackboneKind::resnet101;
  throw ValidationError("unknown backbone '" + name + "'");
}

OverlapMode parse_overlap(const std::string& name) {
  if (name == "average") return OverlapMode::average;
  if (name == "max") return OverlapMode::max;
  throw ValidationError("unknown overlap mode '" + name + "'");
}

namespace {

void add_conv_bn_relu(nn::Sequential& s, int in, int out, int kernel, int stride) {
  s->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(false)));
  s->push_back(nn::BatchNorm2d(out));
  s->push_back(nn::ReLU());
}

// ResNet bottleneck (1x1 -> 3x3 -> 1x1, expansion 4).
class BottleneckImpl : public nn::Module {
 public:
  BottleneckImpl(int in, int width, int stride, int dilation) {
    const int out = width * 4;
    c1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, width, 1).bias(false)));
    b1_ = register_module("bn1", nn::BatchNorm2d(width));
    c2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(width, width, 3)
                                                  .stride(stride).padding(dilation).dilation(dilation).bias(false)));
    b2_ = register_module("bn2", nn::BatchNorm2d(width));
    c3_ = register_module("conv3", nn::Conv2d(nn::Conv2dOptions(width, out, 1).bias(false)));
    b3_ = register_module("bn3", nn::BatchNorm2d(out));
    if (stride != 1 || in != out) {
      down_ = register_module("downsample", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                                                           nn::BatchNorm2d(out)));
    }
  }

  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(b1_(c1_(x)));
    y = torch::relu(b2_(c2_(y)));
    y = b3_(c3_(y));
    return torch::relu(y + (down_ ? down_->forward(x) : x));
  }

 private:
  nn::Conv2d c1_{nullptr}, c2_{nullptr}, c3_{nullptr};
  nn::BatchNorm2d b1_{nullptr}, b2_{nullptr}, b3_{nullptr};
  nn::Sequential down_{nullptr};
};
TORCH_MODULE(Bottleneck);

// ResNet-101 trunk up to layer3, with layer3 dilated so the output stride stays 8.
nn::Sequential resnet101_trunk(int out_channels) {
  nn::Sequential s;
  s->push_back(nn::Conv2d(nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)));
  s->push_back(nn::BatchNorm2d(64));
  s->push_back(nn::ReLU());
  s->push_back(nn::MaxPool2d(nn::MaxPool2dOptions(3).stride(2).padding(1)));
  int in = 64;
  auto layer = [&](int width, int blocks, int stride, int dilation) {
    for (int i = 0; i < blocks; ++i) {
      s->push_back(Bottleneck(in, width, i == 0 ? stride : 1, dilation));
      in = width * 4;
    }
  };
  layer(64, 3, 1, 1);
  layer(128, 4, 2, 1);
  layer(256, 23, 1, 2);
  s->push_back(nn::Conv2d(nn::Conv2dOptions(in, out_channels, 1)));
  return s;
}

}  // namespace

ImageBackboneImpl::ImageBackboneImpl(BackboneKind kind, int out_channels) : out_channels_(out_channels) {
  if (kind == BackboneKind::small_cnn) {
    trunk_ = nn::Sequential();
    add_conv_bn_relu(trunk_, 3, 16, 3, 2);
    add_conv_bn_relu(trunk_, 16, 32, 3, 2);
    add_conv_bn_relu(trunk_, 32, out_channels, 3, 2);
    add_conv_bn_relu(trunk_, out_channels, out_channels, 3, 1);
  } else {
    trunk_ = resnet101_trunk(out_channels);
  }
  register_module("trunk", trunk_);
}

torch::Tensor ImageBackboneImpl::forward(const torch::Tensor& images) {
  if (images.dim() != 4 || images.size(1) != 3) throw ShapeError("backbone expects [N, 3, H, W] images");
  if (images.size(2) % stride != 0 || images.size(3) % stride != 0)
    throw ShapeError("image size must be a multiple of the backbone stride");
  return trunk_->forward(images - 0.5);
}

torch::Tensor images_to_tensor(const std::vector<Image>& views) {
  if (views.empty()) throw ShapeError("no camera views");
  const int h = views.front().height;
  const int w = views.front().width;
  auto out = torch::empty({static_cast<long>(views.size()), 3, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  for (std::size_t k = 0; k < views.size(); ++k) {
    const auto& img = views[k];
    if (img.height != h || img.width != w) throw ShapeError("camera views have mismatched image sizes");
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        for (int ch = 0; ch < 3; ++ch) acc[k][ch][r][c] = img.at(r, c, ch);
  }
  return out;
}

torch::Tensor extract_image_features(ImageBackbone& backbone, const std::vector<Image>& views) {
  auto input = images_to_tensor(views);
  torch::NoGradGuard no_grad;
  const bool was_training = backbone->is_training();
  backbone->eval();
  auto out = backbone->forward(input);
  if (was_training) backbone->train();
  return out;
}

BevProjection make_bev_projection(const CameraRig& rig, const BevGridSpec& grid, int feature_height, int feature_width,
                                  int stride) {
  rig.validate();
  grid.validate();
  if (feature_height < 2 || feature_width < 2) throw ShapeError("feature maps must be at least 2x2 for projection");
  const long k = static_cast<long>(rig.size());
  const int g = grid.size;
  BevProjection proj;
  proj.sample_grid = torch::zeros({k, g, g, 2}, torch::kFloat32);
  proj.valid = torch::zeros({k, 1, g, g}, torch::kFloat32);
  auto sg = proj.sample_grid.accessor<float, 4>();
  auto va = proj.valid.accessor<float, 4>();
  for (long v = 0; v < k; ++v) {
    const auto& cam = rig.views[v];
    for (int r = 0; r < g; ++r) {
      for (int c = 0; c < g; ++c) {
        const auto [x, y] = grid.cell_center(r, c);
        const auto uv = cam.project(Eigen::Vector3d(x, y, 0.0));
        if (!uv || !cam.in_image(*uv)) continue;
        // Image pixel -> feature pixel (pixel centers at integers in both).
        const double fu = std::clamp((uv->x() + 0.5) / stride - 0.5, 0.0, feature_width - 1.0);
        const double fv = std::clamp((uv->y() + 0.5) / stride - 0.5, 0.0, feature_height - 1.0);
        sg[v][r][c][0] = static_cast<float>(2.0 * fu / (feature_width - 1) - 1.0);
        sg[v][r][c][1] = static_cast<float>(2.0 * fv / (feature_height - 1) - 1.0);
        va[v][0][r][c] = 1.0f;
      }
    }
  }
  return proj;
}

torch::Tensor project_to_bev(const torch::Tensor& features, const torch::Tensor& sample_grid, const torch::Tensor& valid,
                             OverlapMode mode) {
  if (features.dim() != 5 || sample_grid.dim() != 5 || valid.dim() != 5)
    throw ShapeError("project_to_bev expects [B, K, C, h, w] features and [B, K, G, G, 2] grids");
  const auto b = features.size(0), k = features.size(1), c = features.size(2);
  const auto g = sample_grid.size(2);
  auto sampled = F::grid_sample(features.flatten(0, 1), sample_grid.flatten(0, 1),
                                F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(true))
                     .view({b, k, c, g, g});
  auto count = valid.sum(1);  // [B, 1, G, G]
  if (mode == OverlapMode::average) {
    return (sampled * valid).sum(1) / count.clamp_min(1.0);
  }
  auto masked = sampled.masked_fill(valid.expand_as(sampled) == 0, -std::numeric_limits<float>::infinity());
  auto best = std::get<0>(masked.max(1));
  return torch::where(count > 0, best, torch::zeros_like(best));
}

BEVFeatureMap project_to_bev(const torch::Tensor& view_features, const CameraRig& rig, const BevGridSpec& grid,
                             int stride, OverlapMode mode) {
  if (view_features.dim() != 4 || view_features.size(0) != static_cast<long>(rig.size()))
    throw ShapeError("view features must be [K, C, h, w] with K equal to the rig size");
  const auto proj = make_bev_projection(rig, grid, static_cast<int>(view_features.size(2)),
                                        static_cast<int>(view_features.size(3)), stride);
  auto out = project_to_bev(view_features.unsqueeze(0), proj.sample_grid.unsqueeze(0), proj.valid.unsqueeze(0), mode);
  return BEVFeatureMap{out.squeeze(0), grid};
}

torch::Tensor bilinear_sample(const torch::Tensor& feature, double u, double v) {
  if (feature.dim() != 3) throw ShapeError("bilinear_sample expects a [C, H, W] map");
  const auto h = feature.size(1), w = feature.size(2);
  auto grid = torch::tensor({static_cast<float>(2.0 * u / (w - 1) - 1.0), static_cast<float>(2.0 * v / (h - 1) - 1.0)})
                  .view({1, 1, 1, 2});
  return F::grid_sample(feature.unsqueeze(0), grid,
                        F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(true))
      .view({feature.size(0)});
}

PillarScatter scatter_radar_pillars(const std::vector<RadarPoint>& points, const BevGridSpec& grid) {
  const int g = grid.size;
  std::vector<double> count(static_cast<std::size_t>(g) * g, 0.0), zsum(count.size(), 0.0), vsum(count.size(), 0.0);
  PillarScatter out;
  for (const auto& p : points) {
    const auto cell = grid.locate(p.x, p.y);
    if (!cell) {
      ++out.ignored;
      continue;
    }
    const std::size_t i = static_cast<std::size_t>(cell->first) * g + cell->second;
    count[i] += 1.0;
    zsum[i] += p.z;
    vsum[i] += p.radial_velocity;
  }
  out.pillars = torch::zeros({3, g, g}, torch::kFloat32);
  auto acc = out.pillars.accessor<float, 3>();
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * g + c;
      if (count[i] == 0.0) continue;
      acc[0][r][c] = static_cast<float>(std::log1p(count[i]));
      acc[1][r][c] = static_cast<float>(zsum[i] / count[i]);
      acc[2][r][c] = static_cast<float>(vsum[i] / count[i]);
    }
  }
  return out;
}

RadarPillarNetImpl::RadarPillarNetImpl(int out_channels) {
  nn::Sequential net;
  add_conv_bn_relu(net, 3, out_channels, 3, 1);
  add_conv_bn_relu(net, out_channels, out_channels, 3, 1);
  net_ = register_module("net", net);
}

torch::Tensor RadarPillarNetImpl::forward(const torch::Tensor& pillars) { return net_->forward(pillars); }

BEVFeatureMap voxelize_radar(RadarPillarNet& net, const std::vector<RadarPoint>& points, const BevGridSpec& grid) {
  const auto scatter = scatter_radar_pillars(points, grid);
  torch::NoGradGuard no_grad;
  const bool was_training = net->is_training();
  net->eval();
  auto out = net->forward(scatter.pillars.unsqueeze(0)).squeeze(0);
  if (was_training) net->train();
  return BEVFeatureMap{out, grid};
}

SemanticEncoderImpl::SemanticEncoderImpl(const EncoderSettings& s)
    : fusion_(parse_fusion_strategy(s.fusion)), overlap_(parse_overlap(s.overlap)) {
  if (fusion_ == FusionStrategy::ensemble || fusion_ == FusionStrategy::mixture_of_experts)
    throw UnimplementedError(s.fusion + " fusion is not implemented");
  if (fusion_ != FusionStrategy::concatenation && s.image_channels != s.radar_channels)
    throw ShapeError(s.fusion + " fusion requires equal camera and radar channel counts");
  backbone_ = register_module("backbone", ImageBackbone(parse_backbone(s.backbone), s.image_channels));
  radar_ = register_module("radar", RadarPillarNet(s.radar_channels));
  out_channels_ = fusion_ == FusionStrategy::concatenation ? s.image_channels + s.radar_channels : s.image_channels;
}

torch::Tensor SemanticEncoderImpl::camera_bev(const torch::Tensor& images, const torch::Tensor& sample_grid,
                                              const torch::Tensor& valid) {
  const auto b = images.size(0), k = images.size(1);
  auto feats = backbone_->forward(images.flatten(0, 1));
  feats = feats.view({b, k, feats.size(1), feats.size(2), feats.size(3)});
  return project_to_bev(feats, sample_grid, valid, overlap_);
}

torch::Tensor SemanticEncoderImpl::radar_bev(const torch::Tensor& pillars) { return radar_->forward(pillars); }

torch::Tensor SemanticEncoderImpl::forward(const torch::Tensor& images, const torch::Tensor& pillars,
                                           const torch::Tensor& sample_grid, const torch::Tensor& valid) {
  return fuse_tensors(camera_bev(images, sample_grid, valid), radar_bev(pillars), fusion_);
}

}  // namespace bevlink
