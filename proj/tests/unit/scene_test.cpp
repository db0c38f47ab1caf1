#include "bevlink/scene.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "bevlink/render.hpp"

namespace bevlink {
namespace {

// Independent point-in-rotated-rectangle oracle.
bool inside_footprint(const VehicleState& v, double x, double y) {
  const double dx = x - v.x;
  const double dy = y - v.y;
  const double c = std::cos(v.heading);
  const double s = std::sin(v.heading);
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return std::abs(along) <= v.length / 2.0 && std::abs(across) <= v.width / 2.0;
}

OccupancyGrid oracle_mask(const std::vector<VehicleState>& vehicles, const BevGridSpec& grid) {
  OccupancyGrid m(grid.size);
  for (int r = 0; r < grid.size; ++r) {
    for (int c = 0; c < grid.size; ++c) {
      const auto [x, y] = grid.cell_center(r, c);
      for (const auto& v : vehicles) {
        if (inside_footprint(v, x, y)) m.at(r, c) = 1;
      }
    }
  }
  return m;
}

std::pair<double, double> centroid(const OccupancyGrid& m) {
  double sr = 0.0, sc = 0.0, n = 0.0;
  for (int r = 0; r < m.size; ++r) {
    for (int c = 0; c < m.size; ++c) {
      if (m.at(r, c)) {
        sr += r;
        sc += c;
        n += 1.0;
      }
    }
  }
  return {sr / n, sc / n};
}

SceneParams small_params(SceneStyle style, int frames = 4) {
  auto p = SceneParams::preset(style);
  p.num_frames = frames;
  p.image_size = 32;
  return p;
}

TEST(Rasterize, MatchesRotatedRectangleOracleOnRandomVehicles) {
  const auto grid = BevGridSpec::centered(16.0, 32);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(-18.0, 18.0);
  std::uniform_real_distribution<double> ang(-3.2, 3.2);
  std::uniform_real_distribution<double> len(1.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VehicleState> vs(1 + trial % 4);
    for (auto& v : vs) {
      v.x = pos(rng);
      v.y = pos(rng);
      v.heading = ang(rng);
      v.length = len(rng);
      v.width = len(rng) / 2.0;
    }
    ASSERT_EQ(rasterize(vs, grid), oracle_mask(vs, grid)) << "trial " << trial;
  }
}

TEST(GenerateSequence, IsBitIdenticalForTheSameSeed) {
  const auto grid = BevGridSpec::centered(16.0, 16);
  const auto p = small_params(SceneStyle::A);
  EXPECT_EQ(generate_sequence(7, p, grid), generate_sequence(7, p, grid));
  EXPECT_NE(generate_sequence(7, p, grid).frames[0], generate_sequence(8, p, grid).frames[0]);
}

TEST(GenerateSequence, EmptySceneHasEmptyMasksAndNoRadarReturnsFromVehicles) {
  auto p = small_params(SceneStyle::C);
  p.min_vehicles = 0;
  p.max_vehicles = 0;
  p.clutter_points = 0;
  const auto seq = generate_sequence(3, p, BevGridSpec::centered(16.0, 16));
  for (const auto& f : seq.frames) {
    EXPECT_EQ(f.gt_mask.count(), 0U);
    EXPECT_TRUE(f.radar_points.empty());
    EXPECT_TRUE(f.vehicle_states.empty());
  }
}

TEST(GenerateSequence, FramesSatisfyStructuralInvariants) {
  const auto grid = BevGridSpec::centered(32.0, 64);
  for (auto style : {SceneStyle::A, SceneStyle::B, SceneStyle::C}) {
    const auto seq = generate_sequence(21, small_params(style, 5), grid);
    EXPECT_NO_THROW(seq.validate());
    ASSERT_EQ(seq.frames.size(), 5U);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
      const auto& f = seq.frames[i];
      EXPECT_DOUBLE_EQ(f.timestamp_s, static_cast<double>(i) * seq.delta_t_s);
      EXPECT_EQ(f.gt_mask, oracle_mask(f.vehicle_states, grid));
      EXPECT_EQ(f.camera_views.size(), 6U);
      for (const auto& img : f.camera_views) {
        for (float v : img.data) ASSERT_TRUE(v >= 0.0f && v <= 1.0f);
      }
      for (const auto& pt : f.radar_points) EXPECT_TRUE(grid.contains(pt.x, pt.y));
    }
  }
}

TEST(GenerateSequence, VehiclesMoveWithConstantVelocity) {
  const auto grid = BevGridSpec::centered(32.0, 64);
  const auto seq = generate_sequence(5, small_params(SceneStyle::A, 6), grid);
  for (std::size_t i = 0; i + 1 < seq.frames.size(); ++i) {
    for (const auto& next : seq.frames[i + 1].vehicle_states) {
      for (const auto& cur : seq.frames[i].vehicle_states) {
        if (cur.id != next.id) continue;
        EXPECT_NEAR(next.x, cur.x + cur.vx * seq.delta_t_s, 1e-9);
        EXPECT_NEAR(next.y, cur.y + cur.vy * seq.delta_t_s, 1e-9);
      }
    }
  }
}

TEST(Advance, SingleVehicleCentroidShiftsByVelocityOverCellSize) {
  const auto grid = BevGridSpec::centered(32.0, 64);
  VehicleState v;
  v.vx = 2.0;
  const auto m0 = rasterize({v}, grid);
  const auto moved = advance({v}, 1.0, grid);
  ASSERT_EQ(moved.size(), 1U);
  EXPECT_DOUBLE_EQ(moved[0].x, 2.0);
  EXPECT_DOUBLE_EQ(moved[0].y, 0.0);
  const auto m1 = rasterize(moved, grid);
  const auto [r0, c0] = centroid(m0);
  const auto [r1, c1] = centroid(m1);
  EXPECT_NEAR(c1 - c0, 2.0 / grid.cell_size(), 1e-9);
  EXPECT_NEAR(r1 - r0, 0.0, 1e-9);
}

TEST(Advance, DropsVehiclesThatLeaveTheGrid) {
  const auto grid = BevGridSpec::centered(8.0, 16);
  VehicleState v;
  v.x = 7.0;
  v.vx = 2.0;
  EXPECT_TRUE(advance({v}, 1.0, grid).empty());
}

TEST(SceneParams, ValidationAndPresets) {
  EXPECT_EQ(parse_scene_style("A"), SceneStyle::A);
  EXPECT_EQ(to_string(SceneStyle::C), "C");
  EXPECT_THROW(parse_scene_style("Z"), ValidationError);
  EXPECT_GT(SceneParams::preset(SceneStyle::A).max_vehicles,
            SceneParams::preset(SceneStyle::C).max_vehicles);
  auto p = SceneParams::preset(SceneStyle::A);
  p.num_frames = 3;
  EXPECT_THROW(p.validate(), ValidationError);
  BevGridSpec bad;
  bad.x_max = bad.x_min;
  EXPECT_THROW(generate_sequence(1, SceneParams::preset(SceneStyle::C), bad), ValidationError);
}

TEST(Render, EmptySceneEqualsBackground) {
  const auto rig = CameraRig::surround(6, 32);
  SceneFrame empty;
  EXPECT_EQ(render_camera_views(empty, rig), background_render(rig));
}

TEST(Render, VehicleAheadAppearsInsideProjectedBox) {
  const auto rig = CameraRig::surround(6, 64);
  SceneFrame f;
  VehicleState v;
  v.x = 10.0;
  f.vehicle_states.push_back(v);
  const auto views = render_camera_views(f, rig);
  const auto bg = background_render(rig);
  ASSERT_EQ(views, render_camera_views(f, rig));

  const auto& cam = rig.views[0];
  double u_lo = 1e9, u_hi = -1e9, v_lo = 1e9, v_hi = -1e9;
  for (double dx : {-v.length / 2, v.length / 2}) {
    for (double dy : {-v.width / 2, v.width / 2}) {
      for (double z : {0.0, kVehicleHeightM}) {
        const auto uv = cam.project({v.x + dx, v.y + dy, z});
        ASSERT_TRUE(uv.has_value());
        u_lo = std::min(u_lo, uv->x());
        u_hi = std::max(u_hi, uv->x());
        v_lo = std::min(v_lo, uv->y());
        v_hi = std::max(v_hi, uv->y());
      }
    }
  }
  int inside = 0, outside = 0;
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      bool differs = false;
      for (int ch = 0; ch < 3; ++ch) differs |= views[0].at(r, c, ch) != bg[0].at(r, c, ch);
      if (!differs) continue;
      const bool in_box = c >= std::floor(u_lo) - 1 && c <= std::ceil(u_hi) + 1 &&
                          r >= std::floor(v_lo) - 1 && r <= std::ceil(v_hi) + 1;
      (in_box ? inside : outside) += 1;
    }
  }
  EXPECT_GT(inside, 0);
  EXPECT_EQ(outside, 0);
}

}  // namespace
}  // namespace bevlink
