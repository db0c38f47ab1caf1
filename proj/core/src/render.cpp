#include "bevlink/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace bevlink {

namespace {

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int vehicle = -1;
};

// Slab intersection against the vehicle's oriented box; updates `hit` when closer.
void intersect_box(const VehicleState& v, int index, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                   Hit& hit) {
  const double c = std::cos(v.heading);
  const double s = std::sin(v.heading);
  const std::array<Eigen::Vector3d, 3> axes{Eigen::Vector3d(c, s, 0.0), Eigen::Vector3d(-s, c, 0.0),
                                            Eigen::Vector3d(0.0, 0.0, 1.0)};
  const std::array<double, 3> half{0.5 * v.length, 0.5 * v.width, 0.5 * kVehicleHeightM};
  const Eigen::Vector3d rel = origin - Eigen::Vector3d(v.x, v.y, 0.5 * kVehicleHeightM);

  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = 0;
  double near_sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double o = axes[a].dot(rel);
    const double d = axes[a].dot(dir);
    if (std::abs(d) < 1e-12) {
      if (std::abs(o) > half[a]) return;
      continue;
    }
    double t0 = (-half[a] - o) / d;
    double t1 = (half[a] - o) / d;
    double sign = -1.0;
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1.0;
    }
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
      near_sign = sign;
    }
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return;
  }
  if (t_near <= 1e-6 || t_near >= hit.t) return;
  hit.t = t_near;
  hit.normal = axes[near_axis] * near_sign;
  hit.vehicle = index;
}

Eigen::Vector3d vehicle_color(int id) {
  // Spread hues with the golden ratio; saturated mid-bright body colors.
  const double hue = std::fmod(0.13 + 0.61803398875 * id, 1.0) * 6.0;
  const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
  Eigen::Vector3d rgb;
  switch (static_cast<int>(hue)) {
    case 0: rgb = {1, x, 0}; break;
    case 1: rgb = {x, 1, 0}; break;
    case 2: rgb = {0, 1, x}; break;
    case 3: rgb = {0, x, 1}; break;
    case 4: rgb = {x, 0, 1}; break;
    default: rgb = {1, 0, x}; break;
  }
  return 0.25 * Eigen::Vector3d::Ones() + 0.75 * rgb;
}

}  // namespace

std::vector<Image> render_camera_views(const SceneFrame& frame, const CameraRig& rig, const RenderStyle& style) {
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.2, 1.0).normalized();
  const Eigen::Vector3d sky = Eigen::Vector3d(0.55, 0.7, 0.9) * style.brightness;
  const double vehicle_gain = 0.4 + 0.6 * style.brightness;

  std::vector<Image> views;
  views.reserve(rig.size());
  for (const auto& cam : rig.views) {
    Image img(cam.height, cam.width);
    const Eigen::Vector3d origin = cam.center();
    for (int row = 0; row < cam.height; ++row) {
      for (int col = 0; col < cam.width; ++col) {
        const Eigen::Vector3d dir = cam.ray(col, row);
        Hit hit;
        for (std::size_t i = 0; i < frame.vehicle_states.size(); ++i)
          intersect_box(frame.vehicle_states[i], static_cast<int>(i), origin, dir, hit);

        Eigen::Vector3d color = sky;
        if (hit.vehicle >= 0) {
          const double shade = 0.35 + 0.65 * std::max(0.0, hit.normal.dot(light));
          color = vehicle_color(frame.vehicle_states[hit.vehicle].id) * shade * vehicle_gain;
        } else if (dir.z() < -1e-9) {
          const double t = -origin.z() / dir.z();
          const Eigen::Vector3d p = origin + t * dir;
          const double dist = std::hypot(p.x(), p.y());
          const double g = style.brightness * 0.5 * (1.0 - 0.3 * std::min(1.0, dist / 60.0));
          color = Eigen::Vector3d(g, g, g);
        }
        for (int ch = 0; ch < 3; ++ch) img.at(row, col, ch) = static_cast<float>(std::clamp(color[ch], 0.0, 1.0));
      }
    }
    views.push_back(std::move(img));
  }
  return views;
}

std::vector<Image> background_render(const CameraRig& rig, const RenderStyle& style) {
  return render_camera_views(SceneFrame{}, rig, style);
}

}  // namespace bevlink
