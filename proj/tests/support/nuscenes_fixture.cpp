#include "nuscenes_fixture.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/Geometry>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "bevlink/nuscenes.hpp"
#include "json.hpp"

namespace bevlink::testing {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_table(const fs::path& meta, const std::string& name, const json& rows) {
  std::ofstream(meta / (name + ".json")) << rows.dump();
}

void write_radar_pcd(const fs::path& file, int points) {
  std::ofstream out(file, std::ios::binary);
  out << "# .PCD v0.7\nVERSION 0.7\nFIELDS x y z dyn_prop vx_comp vy_comp\nSIZE 4 4 4 1 4 4\n"
         "TYPE F F F I F F\nCOUNT 1 1 1 1 1 1\nWIDTH "
      << points << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " << points << "\nDATA binary\n";
  for (int i = 0; i < points; ++i) {
    const float row[3] = {8.0f + static_cast<float>(i), 0.5f, 0.3f};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
    const char dyn = 0;
    out.write(&dyn, 1);
    const float vel[2] = {1.0f, 0.0f};
    out.write(reinterpret_cast<const char*>(vel), sizeof(vel));
  }
}

// Quaternion (w, x, y, z) for a yaw rotation about +z.
json yaw_quaternion(double yaw) { return json::array({std::cos(yaw / 2), 0.0, 0.0, std::sin(yaw / 2)}); }

}  // namespace

void write_nuscenes_fixture(const fs::path& root, const NuScenesFixtureOptions& options) {
  const fs::path meta = root / "v1.0-mini";
  fs::create_directories(meta);
  const auto& cams = nuscenes_camera_channels();
  std::vector<std::string> channels(cams.begin(), cams.end());
  channels.push_back("RADAR_FRONT");
  for (const auto& ch : channels) fs::create_directories(root / "samples" / ch);

  json sensor = json::array(), calibrated = json::array(), category = json::array();
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const bool is_cam = k < cams.size();
    sensor.push_back({{"token", "sensor-" + channels[k]}, {"channel", channels[k]},
                      {"modality", is_cam ? "camera" : "radar"}});
    json cs = {{"token", "cs-" + channels[k]}, {"sensor_token", "sensor-" + channels[k]}};
    if (is_cam) {
      // Camera optical axis (z) along the ego yaw direction, image y pointing down.
      const double yaw = 2.0 * 3.14159265358979 * static_cast<double>(k) / 6.0;
      const double c = std::cos(yaw), s = std::sin(yaw);
      // Columns: camera x (right), y (down), z (forward) in the ego frame.
      Eigen::Matrix3d r;
      r << s, 0, c, -c, 0, s, 0, -1, 0;
      const Eigen::Quaterniond q(r);
      cs["rotation"] = json::array({q.w(), q.x(), q.y(), q.z()});
      cs["translation"] = json::array({1.0, 0.0, 1.6});
      const double f = 0.5 * options.image_width;
      cs["camera_intrinsic"] = json::array({json::array({f, 0.0, options.image_width / 2.0}),
                                            json::array({0.0, f, options.image_height / 2.0}),
                                            json::array({0.0, 0.0, 1.0})});
    } else {
      cs["rotation"] = yaw_quaternion(0.0);
      cs["translation"] = json::array({2.0, 0.0, 0.5});
      cs["camera_intrinsic"] = json::array();
    }
    calibrated.push_back(cs);
  }
  category.push_back({{"token", "cat-car"}, {"name", "vehicle.car"}});
  category.push_back({{"token", "cat-ped"}, {"name", "human.pedestrian.adult"}});

  json scene = json::array(), sample = json::array(), sample_data = json::array(), ego_pose = json::array(),
       annotation = json::array(), instance = json::array();
  const cv::Mat image(options.image_height, options.image_width, CV_8UC3, cv::Scalar(40, 90, 160));
  int global = 0;
  for (std::size_t sc = 0; sc < options.samples_per_scene.size(); ++sc) {
    const std::string name = "scene-" + std::to_string(1000 + sc);
    const int n = options.samples_per_scene[sc];
    scene.push_back({{"token", "scene-tok-" + std::to_string(sc)}, {"name", name},
                     {"first_sample_token", n > 0 ? "sample-" + std::to_string(global) : ""}});
    const std::string car = "inst-car-" + std::to_string(sc), ped = "inst-ped-" + std::to_string(sc);
    instance.push_back({{"token", car}, {"category_token", "cat-car"}});
    instance.push_back({{"token", ped}, {"category_token", "cat-ped"}});
    for (int i = 0; i < n; ++i, ++global) {
      const std::string tok = "sample-" + std::to_string(global);
      const std::int64_t ts = 1'500'000'000'000'000LL + static_cast<std::int64_t>(global) * 500'000;
      const double ego_x = 100.0 + 2.0 * i;
      sample.push_back({{"token", tok}, {"timestamp", ts}, {"scene_token", "scene-tok-" + std::to_string(sc)},
                        {"prev", i > 0 ? "sample-" + std::to_string(global - 1) : ""},
                        {"next", i + 1 < n ? "sample-" + std::to_string(global + 1) : ""}});
      const std::string ep = "ego-" + std::to_string(global);
      ego_pose.push_back({{"token", ep}, {"timestamp", ts}, {"rotation", yaw_quaternion(0.0)},
                          {"translation", json::array({ego_x, 50.0, 0.0})}});
      for (const auto& ch : channels) {
        const bool is_cam = ch != "RADAR_FRONT";
        const std::string file = "samples/" + ch + "/" + tok + (is_cam ? ".png" : ".pcd");
        sample_data.push_back({{"token", "sd-" + ch + "-" + std::to_string(global)}, {"sample_token", tok},
                               {"ego_pose_token", ep}, {"calibrated_sensor_token", "cs-" + ch},
                               {"filename", file}, {"is_key_frame", true}, {"timestamp", ts},
                               {"width", is_cam ? options.image_width : 0},
                               {"height", is_cam ? options.image_height : 0}});
        if (global == options.missing_camera_sample && ch == "CAM_BACK") continue;
        if (is_cam) {
          cv::imwrite((root / file).string(), image);
        } else {
          write_radar_pcd(root / file, options.radar_points);
        }
      }
      // A car ahead of the ego vehicle moving along +x and a pedestrian off to the side.
      auto ann_tok = [&](const std::string& who, int g) { return "ann-" + who + "-" + std::to_string(g); };
      annotation.push_back({{"token", ann_tok("car", global)}, {"sample_token", tok}, {"instance_token", car},
                            {"translation", json::array({ego_x + 10.0 + 2.0 * i, 50.0, 0.8})},
                            {"size", json::array({1.9, 4.5, 1.6})}, {"rotation", yaw_quaternion(0.0)},
                            {"prev", i > 0 ? ann_tok("car", global - 1) : ""},
                            {"next", i + 1 < n ? ann_tok("car", global + 1) : ""}});
      annotation.push_back({{"token", ann_tok("ped", global)}, {"sample_token", tok}, {"instance_token", ped},
                            {"translation", json::array({ego_x, 55.0, 0.9})},
                            {"size", json::array({0.6, 0.6, 1.7})}, {"rotation", yaw_quaternion(0.0)},
                            {"prev", ""}, {"next", ""}});
    }
  }
  write_table(meta, "scene", scene);
  write_table(meta, "sample", sample);
  write_table(meta, "sample_data", sample_data);
  write_table(meta, "calibrated_sensor", calibrated);
  write_table(meta, "sensor", sensor);
  write_table(meta, "ego_pose", ego_pose);
  write_table(meta, "sample_annotation", annotation);
  write_table(meta, "instance", instance);
  write_table(meta, "category", category);
}

}  // namespace bevlink::testing
