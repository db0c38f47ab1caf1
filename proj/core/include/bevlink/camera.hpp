#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "bevlink/grid.hpp"

namespace bevlink {

/// Pinhole camera in the OpenCV convention (x right, y down, z forward).
/// A point in the ego frame maps to the camera frame as p_cam = rotation * p_ego + translation.
struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  /// Pixel coordinates (u, v) with pixel centers at integers; nullopt behind the camera.
  std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& p_ego) const;

  bool in_image(const Eigen::Vector2d& uv) const noexcept {
    return uv.x() >= 0.0 && uv.x() <= width - 1.0 && uv.y() >= 0.0 && uv.y() <= height - 1.0;
  }

  /// Camera center in the ego frame.
  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

  /// Unit viewing ray through pixel (u, v), expressed in the ego frame.
  Eigen::Vector3d ray(double u, double v) const;

  /// Camera whose pose is given as a camera->ego transform (nuScenes calibrated_sensor style).
  static PinholeCamera from_sensor_pose(double fx, double fy, double cx, double cy, int width,
                                        int height, const Eigen::Matrix3d& cam_to_ego,
                                        const Eigen::Vector3d& cam_origin_in_ego);
};

struct CameraRig {
  std::vector<PinholeCamera> views;

  std::size_t size() const noexcept { return views.size(); }

  /// Throws ValidationError on non-orthonormal rotations or empty/inconsistent views.
  void validate() const;

  /// Ring of `num_views` cameras at equal yaw spacing, mounted at `mount_height_m`,
  /// pitched down by `pitch_rad`, square images with horizontal field of view `hfov_rad`.
  static CameraRig surround(int num_views, int image_size, double hfov_rad = 1.2217304763960306,
                            double mount_height_m = 1.6, double pitch_rad = 0.3490658503988659);

  /// Fraction of grid cell centers (on the ground plane) that land inside at least one view.
  double ground_coverage(const BevGridSpec& grid) const;

  bool operator==(const CameraRig& other) const;
};

}  // namespace bevlink
