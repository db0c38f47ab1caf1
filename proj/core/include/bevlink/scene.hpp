#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevlink/camera.hpp"
#include "bevlink/grid.hpp"

namespace bevlink {

/// H x W x 3 RGB image, interleaved, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  float& at(int row, int col, int ch) { return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch]; }
  float at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  bool operator==(const Image&) const = default;
};

/// Oriented vehicle footprint with constant planar velocity.
struct VehicleState {
  int id = 0;
  double x = 0.0;  ///< center, meters (ego frame)
  double y = 0.0;
  double heading = 0.0;  ///< radians, counter-clockwise from +x
  double length = 4.5;
  double width = 1.9;
  double vx = 0.0;  ///< m/s
  double vy = 0.0;
  bool operator==(const VehicleState&) const = default;
};

struct RadarPoint {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float radial_velocity = 0.0f;
  bool operator==(const RadarPoint&) const = default;
};

/// G x G binary grid, row-major (see BevGridSpec for indexing).
struct OccupancyGrid {
  int size = 0;
  std::vector<std::uint8_t> cells;

  OccupancyGrid() = default;
  explicit OccupancyGrid(int g) : size(g), cells(static_cast<std::size_t>(g) * g, 0) {}

  std::uint8_t& at(int row, int col) { return cells[static_cast<std::size_t>(row) * size + col]; }
  std::uint8_t at(int row, int col) const { return cells[static_cast<std::size_t>(row) * size + col]; }
  std::size_t count() const;
  bool operator==(const OccupancyGrid&) const = default;
};

struct SceneFrame {
  int frame_id = 0;
  double timestamp_s = 0.0;
  std::vector<Image> camera_views;
  std::vector<RadarPoint> radar_points;
  OccupancyGrid gt_mask;
  std::vector<VehicleState> vehicle_states;
  bool operator==(const SceneFrame&) const = default;
};

struct SceneSequence {
  std::string scene_id;
  std::string style;
  std::uint64_t seed = 0;
  double delta_t_s = 1.0;
  BevGridSpec grid;
  CameraRig rig;
  std::vector<SceneFrame> frames;

  /// Throws ValidationError when the sequence breaks its structural invariants
  /// (too few frames, non-uniform timestamps, mask size mismatch).
  void validate() const;
  bool operator==(const SceneSequence&) const = default;
};

/// Synthetic scene styles: A = dense daytime lot, B = night street, C = sparse low-complexity.
enum class SceneStyle { A, B, C };

SceneStyle parse_scene_style(const std::string& name);
std::string to_string(SceneStyle style);

struct SceneParams {
  std::string style = "C";  ///< label recorded on generated sequences
  int min_vehicles = 1;
  int max_vehicles = 3;
  double min_speed_mps = 1.9;
  double max_speed_mps = 2.1;
  double heading_spread_rad = 0.1;  ///< headings drawn in [-spread, spread] around +x
  int num_frames = 8;
  double delta_t_s = 1.0;
  double background_brightness = 0.6;
  double image_noise = 0.02;
  double radar_noise_m = 0.15;
  int radar_points_per_vehicle = 24;
  int clutter_points = 5;
  int num_views = 6;
  int image_size = 128;

  static SceneParams preset(SceneStyle style);
  void validate() const;
};

/// Cells whose centers fall inside any vehicle footprint.
OccupancyGrid rasterize(const std::vector<VehicleState>& vehicles, const BevGridSpec& grid);

/// Deterministic constant-velocity synthetic sequence. Pure function of (seed, params, grid).
SceneSequence generate_sequence(std::uint64_t seed, const SceneParams& params, const BevGridSpec& grid);

/// Vehicle states at time `t_s` under constant velocity, dropping vehicles whose center left the grid.
std::vector<VehicleState> advance(const std::vector<VehicleState>& initial, double t_s, const BevGridSpec& grid);

}  // namespace bevlink
