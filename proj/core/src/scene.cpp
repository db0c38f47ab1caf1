#include "bevlink/scene.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "bevlink/errors.hpp"
#include "bevlink/radar.hpp"
#include "bevlink/render.hpp"
#include "bevlink/rng.hpp"

namespace bevlink {

std::size_t OccupancyGrid::count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }));
}

void SceneSequence::validate() const {
  if (frames.size() < 4) throw ValidationError("sequence " + scene_id + " has fewer than 4 frames");
  if (!(delta_t_s > 0.0)) throw ValidationError("sequence delta_t must be positive");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].gt_mask.size != grid.size)
      throw ValidationError("sequence " + scene_id + ": gt_mask size does not match grid");
    if (i > 0) {
      const double dt = frames[i].timestamp_s - frames[i - 1].timestamp_s;
      if (!(dt > 0.0) || std::abs(dt - delta_t_s) > 1e-6 * std::max(1.0, delta_t_s))
        throw ValidationError("sequence " + scene_id + ": timestamps are not spaced by delta_t");
    }
  }
}

SceneStyle parse_scene_style(const std::string& name) {
  if (name == "A" || name == "a") return SceneStyle::A;
  if (name == "B" || name == "b") return SceneStyle::B;
  if (name == "C" || name == "c") return SceneStyle::C;
  throw ValidationError("unknown scene style '" + name + "' (expected A, B or C)");
}

std::string to_string(SceneStyle style) {
  switch (style) {
    case SceneStyle::A: return "A";
    case SceneStyle::B: return "B";
    case SceneStyle::C: return "C";
  }
  return "?";
}

SceneParams SceneParams::preset(SceneStyle style) {
  SceneParams p;
  p.style = to_string(style);
  switch (style) {
    case SceneStyle::A:  // crowded daytime station / parking lot
      p.min_vehicles = 10;
      p.max_vehicles = 16;
      p.background_brightness = 0.75;
      p.image_noise = 0.02;
      p.radar_noise_m = 0.2;
      p.clutter_points = 30;
      break;
    case SceneStyle::B:  // night street
      p.min_vehicles = 4;
      p.max_vehicles = 8;
      p.background_brightness = 0.25;
      p.image_noise = 0.06;
      p.radar_noise_m = 0.2;
      p.clutter_points = 15;
      break;
    case SceneStyle::C:  // sparse, low complexity
      p.min_vehicles = 1;
      p.max_vehicles = 3;
      p.background_brightness = 0.55;
      p.image_noise = 0.03;
      p.radar_noise_m = 0.15;
      p.clutter_points = 5;
      break;
  }
  return p;
}

void SceneParams::validate() const {
  if (min_vehicles < 0 || max_vehicles < min_vehicles) throw ValidationError("invalid vehicle count range");
  if (min_speed_mps < 0.0 || max_speed_mps < min_speed_mps) throw ValidationError("invalid speed range");
  if (heading_spread_rad < 0.0) throw ValidationError("heading spread must be non-negative");
  if (num_frames < 4) throw ValidationError("a sequence needs at least 4 frames");
  if (!(delta_t_s > 0.0)) throw ValidationError("delta_t must be positive");
  if (image_noise < 0.0 || radar_noise_m < 0.0) throw ValidationError("noise levels must be non-negative");
  if (radar_points_per_vehicle < 0 || clutter_points < 0) throw ValidationError("point counts must be non-negative");
  if (num_views <= 0 || image_size < 8) throw ValidationError("invalid camera configuration");
}

OccupancyGrid rasterize(const std::vector<VehicleState>& vehicles, const BevGridSpec& grid) {
  OccupancyGrid mask(grid.size);
  const double cell = grid.cell_size();
  for (const auto& v : vehicles) {
    const double c = std::cos(v.heading);
    const double s = std::sin(v.heading);
    const double hl = 0.5 * v.length;
    const double hw = 0.5 * v.width;
    // Axis-aligned bound of the rotated footprint limits the cells we visit.
    const double ex = std::abs(c) * hl + std::abs(s) * hw;
    const double ey = std::abs(s) * hl + std::abs(c) * hw;
    const int c0 = std::max(0, static_cast<int>(std::floor((v.x - ex - grid.x_min) / cell)));
    const int c1 = std::min(grid.size - 1, static_cast<int>(std::floor((v.x + ex - grid.x_min) / cell)));
    const int r0 = std::max(0, static_cast<int>(std::floor((v.y - ey - grid.y_min) / cell)));
    const int r1 = std::min(grid.size - 1, static_cast<int>(std::floor((v.y + ey - grid.y_min) / cell)));
    for (int r = r0; r <= r1; ++r) {
      for (int col = c0; col <= c1; ++col) {
        const auto [x, y] = grid.cell_center(r, col);
        const double dx = x - v.x;
        const double dy = y - v.y;
        const double lx = dx * c + dy * s;
        const double ly = -dx * s + dy * c;
        if (std::abs(lx) <= hl && std::abs(ly) <= hw) mask.at(r, col) = 1;
      }
    }
  }
  return mask;
}

std::vector<VehicleState> advance(const std::vector<VehicleState>& initial, double t_s, const BevGridSpec& grid) {
  std::vector<VehicleState> out;
  out.reserve(initial.size());
  for (auto v : initial) {
    v.x += v.vx * t_s;
    v.y += v.vy * t_s;
    if (grid.contains(v.x, v.y)) out.push_back(v);
  }
  return out;
}

namespace {

std::vector<VehicleState> spawn_vehicles(std::mt19937_64& rng, const SceneParams& p, const BevGridSpec& grid) {
  std::uniform_int_distribution<int> count_dist(p.min_vehicles, p.max_vehicles);
  const int n = count_dist(rng);
  const double margin = 2.0;
  std::uniform_real_distribution<double> ux(grid.x_min + margin, grid.x_max - margin);
  std::uniform_real_distribution<double> uy(grid.y_min + margin, grid.y_max - margin);
  std::uniform_real_distribution<double> uh(-p.heading_spread_rad, p.heading_spread_rad);
  std::uniform_real_distribution<double> us(p.min_speed_mps, p.max_speed_mps);
  std::uniform_real_distribution<double> ul(3.8, 5.0);
  std::uniform_real_distribution<double> uw(1.7, 2.1);

  std::vector<VehicleState> vehicles;
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      VehicleState v;
      v.x = ux(rng);
      v.y = uy(rng);
      if (std::abs(v.x) < 4.5 && std::abs(v.y) < 3.0) continue;  // ego footprint
      const bool clear = std::none_of(vehicles.begin(), vehicles.end(), [&](const VehicleState& o) {
        return std::hypot(o.x - v.x, o.y - v.y) < 6.0;
      });
      if (!clear) continue;
      v.id = static_cast<int>(vehicles.size());
      v.heading = uh(rng);
      const double speed = us(rng);
      v.vx = speed * std::cos(v.heading);
      v.vy = speed * std::sin(v.heading);
      v.length = ul(rng);
      v.width = uw(rng);
      vehicles.push_back(v);
      break;
    }
  }
  return vehicles;
}

}  // namespace

SceneSequence generate_sequence(std::uint64_t seed, const SceneParams& params, const BevGridSpec& grid) {
  grid.validate();
  params.validate();

  SceneSequence seq;
  std::ostringstream id;
  id << "synth-" << params.style << "-" << seed;
  seq.scene_id = id.str();
  seq.style = params.style;
  seq.seed = seed;
  seq.delta_t_s = params.delta_t_s;
  seq.grid = grid;
  seq.rig = CameraRig::surround(params.num_views, params.image_size);

  std::mt19937_64 rng(derive_seed(seed, "vehicles"));
  const auto initial = spawn_vehicles(rng, params, grid);
  const RenderStyle style{params.background_brightness};

  for (int i = 0; i < params.num_frames; ++i) {
    SceneFrame frame;
    frame.frame_id = i;
    frame.timestamp_s = i * params.delta_t_s;
    frame.vehicle_states = advance(initial, frame.timestamp_s, grid);
    frame.gt_mask = rasterize(frame.vehicle_states, grid);

    auto points = sample_radar_points(frame, params.radar_noise_m, params.radar_points_per_vehicle,
                                      derive_seed(seed, {static_cast<std::uint64_t>(i), 1}));
    std::erase_if(points, [&](const RadarPoint& p) { return !grid.contains(p.x, p.y); });
    const auto clutter =
        sample_radar_clutter(grid, params.clutter_points, derive_seed(seed, {static_cast<std::uint64_t>(i), 2}));
    points.insert(points.end(), clutter.begin(), clutter.end());
    frame.radar_points = std::move(points);

    frame.camera_views = render_camera_views(frame, seq.rig, style);
    if (params.image_noise > 0.0) {
      std::mt19937_64 img_rng(derive_seed(seed, {static_cast<std::uint64_t>(i), 3}));
      std::normal_distribution<float> noise(0.0f, static_cast<float>(params.image_noise));
      for (auto& img : frame.camera_views)
        for (auto& px : img.data) px = std::clamp(px + noise(img_rng), 0.0f, 1.0f);
    }
    // 8-bit sensor: every stored value is k/255, so datasets round-trip losslessly.
    for (auto& img : frame.camera_views)
      for (auto& px : img.data) px = std::round(px * 255.0f) / 255.0f;
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

}  // namespace bevlink
