#include "bevlink/radar.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bevlink {

std::vector<RadarPoint> sample_radar_points(const SceneFrame& frame, double noise_sigma_m, int points_per_vehicle,
                                            std::uint64_t seed) {
  std::vector<RadarPoint> points;
  if (points_per_vehicle <= 0) return points;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> height(0.2, 1.2);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (const auto& v : frame.vehicle_states) {
    const double c = std::cos(v.heading);
    const double s = std::sin(v.heading);
    const double perimeter = 2.0 * (v.length + v.width);
    for (int k = 0; k < points_per_vehicle; ++k) {
      // Walk the perimeter counter-clockwise starting at the rear-right corner.
      double d = unit(rng) * perimeter;
      double lx, ly;
      if (d < v.length) {
        lx = -0.5 * v.length + d;
        ly = -0.5 * v.width;
      } else if ((d -= v.length) < v.width) {
        lx = 0.5 * v.length;
        ly = -0.5 * v.width + d;
      } else if ((d -= v.width) < v.length) {
        lx = 0.5 * v.length - d;
        ly = 0.5 * v.width;
      } else {
        d -= v.length;
        lx = -0.5 * v.length;
        ly = 0.5 * v.width - d;
      }
      double x = v.x + c * lx - s * ly;
      double y = v.y + s * lx + c * ly;
      const double nx = noise(rng);
      const double ny = noise(rng);
      if (noise_sigma_m > 0.0) {
        x += noise_sigma_m * nx;
        y += noise_sigma_m * ny;
      }
      const double r = std::hypot(x, y);
      const double radial = r > 1e-9 ? (v.vx * x + v.vy * y) / r : 0.0;
      points.push_back(RadarPoint{static_cast<float>(x), static_cast<float>(y), static_cast<float>(height(rng)),
                                  static_cast<float>(radial)});
    }
  }
  return points;
}

std::vector<RadarPoint> sample_radar_clutter(const BevGridSpec& grid, int count, std::uint64_t seed) {
  std::vector<RadarPoint> points;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(grid.x_min, grid.x_max);
  std::uniform_real_distribution<double> uy(grid.y_min, grid.y_max);
  std::uniform_real_distribution<double> uz(0.0, 2.0);
  std::normal_distribution<double> vel(0.0, 0.5);
  for (int i = 0; i < count; ++i) {
    RadarPoint p{static_cast<float>(ux(rng)), static_cast<float>(uy(rng)), static_cast<float>(uz(rng)),
                 static_cast<float>(vel(rng))};
    if (grid.contains(p.x, p.y)) points.push_back(p);
  }
  return points;
}

}  // namespace bevlink
