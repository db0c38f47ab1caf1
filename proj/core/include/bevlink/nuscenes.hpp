#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "bevlink/grid.hpp"
#include "bevlink/scene.hpp"

namespace bevlink {

struct NuScenesOptions {
  std::string version = "v1.0-mini";     ///< metadata table directory under the root
  std::string radar_channel = "RADAR_FRONT";
  std::size_t train_samples = 162;       ///< leading keyframes (scene-name order) labelled train
  int image_size = 128;                  ///< camera images resized to image_size x image_size
  BevGridSpec grid;
};

struct NuScenesLoadReport {
  std::size_t total_samples = 0;    ///< keyframes with complete sensor data
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  std::size_t skipped_samples = 0;  ///< keyframes dropped because a sensor file was missing
};

/// The six surround cameras, in rig order.
const std::vector<std::string>& nuscenes_camera_channels();

/// Loads nuScenes keyframes from the standard devkit layout (`<root>/<version>/*.json`,
/// `<root>/samples/...`). `split` is "train", "test" or "all". Each frame carries six camera
/// images and one radar sweep in the ego frame; vehicle.* annotations are rasterized onto
/// `options.grid`. Throws IngestionError naming the missing table or directory.
std::vector<SceneSequence> load_nuscenes_mini(const std::filesystem::path& root, const std::string& split,
                                              const NuScenesOptions& options = {},
                                              NuScenesLoadReport* report = nullptr);

/// Reads a binary or ascii PCD file into named float columns (row-major, `fields.size()` per point).
struct PointCloudTable {
  std::vector<std::string> fields;
  std::size_t points = 0;
  std::vector<float> values;
  int column(const std::string& name) const;
};
PointCloudTable read_pcd(const std::filesystem::path& file);

}  // namespace bevlink
