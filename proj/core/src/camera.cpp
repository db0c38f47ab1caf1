#include "bevlink/camera.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "bevlink/errors.hpp"

namespace bevlink {

std::optional<Eigen::Vector2d> PinholeCamera::project(const Eigen::Vector3d& p_ego) const {
  const Eigen::Vector3d p = rotation * p_ego + translation;
  if (p.z() <= 1e-6) return std::nullopt;
  return Eigen::Vector2d(fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy);
}

Eigen::Vector3d PinholeCamera::ray(double u, double v) const {
  const Eigen::Vector3d d((u - cx) / fx, (v - cy) / fy, 1.0);
  return (rotation.transpose() * d).normalized();
}

PinholeCamera PinholeCamera::from_sensor_pose(double fx, double fy, double cx, double cy, int width,
                                              int height, const Eigen::Matrix3d& cam_to_ego,
                                              const Eigen::Vector3d& cam_origin_in_ego) {
  PinholeCamera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.rotation = cam_to_ego.transpose();
  cam.translation = -cam.rotation * cam_origin_in_ego;
  return cam;
}

void CameraRig::validate() const {
  if (views.empty()) throw ValidationError("camera rig has no views");
  for (const auto& v : views) {
    if (v.width <= 0 || v.height <= 0) throw ValidationError("camera view has empty image size");
    if (!(v.fx > 0.0) || !(v.fy > 0.0)) throw ValidationError("camera focal length must be positive");
    const double err = (v.rotation.transpose() * v.rotation - Eigen::Matrix3d::Identity()).norm();
    if (!(err < 1e-6)) throw ValidationError("camera rotation is not orthonormal");
  }
}

CameraRig CameraRig::surround(int num_views, int image_size, double hfov_rad, double mount_height_m,
                              double pitch_rad) {
  if (num_views <= 0) throw ValidationError("rig needs at least one view");
  if (image_size <= 0) throw ValidationError("image size must be positive");
  CameraRig rig;
  const double f = 0.5 * image_size / std::tan(0.5 * hfov_rad);
  const Eigen::Vector3d mount(0.0, 0.0, mount_height_m);
  for (int i = 0; i < num_views; ++i) {
    const double yaw = 2.0 * M_PI * i / num_views;
    const Eigen::Vector3d fwd(std::cos(pitch_rad) * std::cos(yaw), std::cos(pitch_rad) * std::sin(yaw),
                              -std::sin(pitch_rad));
    const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
    const Eigen::Vector3d down = fwd.cross(right);
    PinholeCamera cam;
    cam.fx = cam.fy = f;
    cam.cx = cam.cy = 0.5 * (image_size - 1);
    cam.width = cam.height = image_size;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = fwd.transpose();
    cam.translation = -cam.rotation * mount;
    rig.views.push_back(cam);
  }
  return rig;
}

double CameraRig::ground_coverage(const BevGridSpec& grid) const {
  int covered = 0;
  for (int r = 0; r < grid.size; ++r) {
    for (int c = 0; c < grid.size; ++c) {
      const auto [x, y] = grid.cell_center(r, c);
      for (const auto& v : views) {
        const auto uv = v.project(Eigen::Vector3d(x, y, 0.0));
        if (uv && v.in_image(*uv)) {
          ++covered;
          break;
        }
      }
    }
  }
  return static_cast<double>(covered) / grid.cell_count();
}

bool CameraRig::operator==(const CameraRig& other) const {
  if (views.size() != other.views.size()) return false;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& a = views[i];
    const auto& b = other.views[i];
    if (a.fx != b.fx || a.fy != b.fy || a.cx != b.cx || a.cy != b.cy || a.width != b.width ||
        a.height != b.height || a.rotation != b.rotation || a.translation != b.translation)
      return false;
  }
  return true;
}

}  // namespace bevlink
