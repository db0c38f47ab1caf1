#pragma once

#include <vector>

#include "bevlink/camera.hpp"
#include "bevlink/scene.hpp"

namespace bevlink {

struct RenderStyle {
  double brightness = 0.6;
};

/// Toy perspective renderer: flat ground plane, sky, vehicles as shaded 1.5 m tall boxes.
/// Deterministic; no noise is added here.
std::vector<Image> render_camera_views(const SceneFrame& frame, const CameraRig& rig,
                                       const RenderStyle& style = {});

/// What every view shows when the scene is empty.
std::vector<Image> background_render(const CameraRig& rig, const RenderStyle& style = {});

constexpr double kVehicleHeightM = 1.5;

}  // namespace bevlink
