#pragma once

#include <cstdint>
#include <vector>

#include "bevlink/grid.hpp"
#include "bevlink/scene.hpp"

namespace bevlink {

/// Radar returns sampled uniformly along each vehicle footprint boundary, perturbed by
/// isotropic Gaussian noise of `noise_sigma_m` in x/y. Radial velocity is the vehicle velocity
/// projected on the ego->point direction. Points are not clipped to any grid.
std::vector<RadarPoint> sample_radar_points(const SceneFrame& frame, double noise_sigma_m,
                                            int points_per_vehicle, std::uint64_t seed);

/// Uniform false-alarm returns inside the grid extent.
std::vector<RadarPoint> sample_radar_clutter(const BevGridSpec& grid, int count, std::uint64_t seed);

}  // namespace bevlink
