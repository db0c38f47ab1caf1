#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace bevlink::testing {

struct NuScenesFixtureOptions {
  std::vector<int> samples_per_scene{3, 3};
  int image_width = 32;
  int image_height = 18;
  int radar_points = 4;
  /// Keyframe (global order) whose CAM_BACK image file is not written; -1 for none.
  int missing_camera_sample = -1;
};

/// Writes a miniature dataset in the nuScenes devkit layout: metadata tables under
/// `<root>/v1.0-mini`, camera PNGs and binary radar PCDs under `<root>/samples`.
/// Every keyframe carries one car 10 m ahead of the ego vehicle and one pedestrian.
void write_nuscenes_fixture(const std::filesystem::path& root, const NuScenesFixtureOptions& options = {});

}  // namespace bevlink::testing
