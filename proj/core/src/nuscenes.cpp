#include "bevlink/nuscenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bevlink/errors.hpp"
#include "json.hpp"

namespace bevlink {

using nlohmann::json;
namespace fs = std::filesystem;

const std::vector<std::string>& nuscenes_camera_channels() {
  static const std::vector<std::string> kChannels{"CAM_FRONT",      "CAM_FRONT_RIGHT", "CAM_BACK_RIGHT",
                                                  "CAM_BACK",       "CAM_BACK_LEFT",   "CAM_FRONT_LEFT"};
  return kChannels;
}

int PointCloudTable::column(const std::string& name) const {
  const auto it = std::find(fields.begin(), fields.end(), name);
  return it == fields.end() ? -1 : static_cast<int>(it - fields.begin());
}

PointCloudTable read_pcd(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError("cannot open point cloud " + file.string());
  PointCloudTable table;
  std::vector<int> sizes;
  std::vector<char> types;
  std::vector<int> counts;
  std::string data_mode;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "FIELDS") {
      for (std::string f; ls >> f;) table.fields.push_back(f);
    } else if (key == "SIZE") {
      for (int s; ls >> s;) sizes.push_back(s);
    } else if (key == "TYPE") {
      for (char t; ls >> t;) types.push_back(t);
    } else if (key == "COUNT") {
      for (int c; ls >> c;) counts.push_back(c);
    } else if (key == "POINTS") {
      ls >> table.points;
    } else if (key == "DATA") {
      ls >> data_mode;
      break;
    }
  }
  const std::size_t nf = table.fields.size();
  if (nf == 0 || sizes.size() != nf || types.size() != nf) throw IngestionError("malformed PCD header in " + file.string());
  if (counts.empty()) counts.assign(nf, 1);
  if (std::any_of(counts.begin(), counts.end(), [](int c) { return c != 1; }))
    throw IngestionError("PCD fields with COUNT != 1 are not supported: " + file.string());

  table.values.assign(table.points * nf, 0.0f);
  if (data_mode == "ascii") {
    for (std::size_t i = 0; i < table.points * nf; ++i)
      if (!(in >> table.values[i])) throw IngestionError("truncated ascii PCD " + file.string());
    return table;
  }
  if (data_mode != "binary") throw IngestionError("unsupported PCD data mode '" + data_mode + "'");
  std::size_t stride = 0;
  for (int s : sizes) stride += static_cast<std::size_t>(s);
  std::vector<char> raw(stride * table.points);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw IngestionError("truncated binary PCD " + file.string());
  for (std::size_t p = 0; p < table.points; ++p) {
    std::size_t off = p * stride;
    for (std::size_t f = 0; f < nf; ++f) {
      const char* src = raw.data() + off;
      float v = 0.0f;
      const int s = sizes[f];
      switch (types[f]) {
        case 'F':
          if (s == 4) {
            std::memcpy(&v, src, 4);
          } else if (s == 8) {
            double d;
            std::memcpy(&d, src, 8);
            v = static_cast<float>(d);
          }
          break;
        case 'I':
          if (s == 1) v = static_cast<std::int8_t>(*src);
          else if (s == 2) { std::int16_t x; std::memcpy(&x, src, 2); v = x; }
          else if (s == 4) { std::int32_t x; std::memcpy(&x, src, 4); v = static_cast<float>(x); }
          break;
        case 'U':
          if (s == 1) v = static_cast<std::uint8_t>(*src);
          else if (s == 2) { std::uint16_t x; std::memcpy(&x, src, 2); v = x; }
          else if (s == 4) { std::uint32_t x; std::memcpy(&x, src, 4); v = static_cast<float>(x); }
          break;
        default: throw IngestionError("unknown PCD field type in " + file.string());
      }
      table.values[p * nf + f] = v;
      off += static_cast<std::size_t>(s);
    }
  }
  return table;
}

namespace {

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // local -> parent
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

Pose pose_from(const json& j) {
  const auto& q = j.at("rotation");
  const auto& t = j.at("translation");
  Pose p;
  p.rotation = Eigen::Quaterniond(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(),
                                  q.at(3).get<double>())
                   .normalized()
                   .toRotationMatrix();
  p.translation = Eigen::Vector3d(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
  return p;
}

class Tables {
 public:
  explicit Tables(const fs::path& meta) : meta_(meta) {}

  const json& get(const std::string& name) {
    auto it = cache_.find(name);
    if (it != cache_.end()) return it->second;
    const fs::path file = meta_ / (name + ".json");
    if (!fs::exists(file)) throw IngestionError("missing nuScenes table: " + name + ".json");
    std::ifstream in(file);
    try {
      return cache_.emplace(name, json::parse(in)).first->second;
    } catch (const json::exception& e) {
      throw IngestionError("malformed nuScenes table " + name + ".json: " + e.what());
    }
  }

  std::unordered_map<std::string, const json*> index(const std::string& name) {
    std::unordered_map<std::string, const json*> out;
    for (const auto& rec : get(name)) out.emplace(rec.at("token").get<std::string>(), &rec);
    return out;
  }

 private:
  fs::path meta_;
  std::map<std::string, json> cache_;
};

struct KeyframeRefs {
  std::string sample_token;
  std::string scene_name;
  std::int64_t timestamp_us = 0;
  std::map<std::string, const json*> sensor_data;  // channel -> sample_data record
};

Image load_camera_image(const fs::path& file, int size) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IngestionError("unreadable image " + file.string());
  cv::Mat resized;
  cv::resize(bgr, resized, cv::Size(size, size), 0, 0, cv::INTER_AREA);
  Image img(size, size);
  for (int r = 0; r < size; ++r) {
    const auto* row = resized.ptr<cv::Vec3b>(r);
    for (int c = 0; c < size; ++c)
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = row[c][2 - ch] / 255.0f;
  }
  return img;
}

}  // namespace

std::vector<SceneSequence> load_nuscenes_mini(const fs::path& root, const std::string& split,
                                              const NuScenesOptions& options, NuScenesLoadReport* report) {
  if (split != "train" && split != "test" && split != "all")
    throw ValidationError("nuScenes split must be train, test or all");
  if (!fs::is_directory(root)) throw IngestionError("nuScenes root not found: " + root.string());
  const fs::path meta = root / options.version;
  if (!fs::is_directory(meta)) throw IngestionError("nuScenes metadata directory not found: " + meta.string());
  options.grid.validate();

  Tables tables(meta);
  // Touch every table up front so a missing one fails before any work.
  for (const char* name : {"scene", "sample", "sample_data", "calibrated_sensor", "sensor", "ego_pose",
                           "sample_annotation", "instance", "category"})
    tables.get(name);

  auto samples = tables.index("sample");
  auto calibrated = tables.index("calibrated_sensor");
  auto sensors = tables.index("sensor");
  auto ego_poses = tables.index("ego_pose");
  auto instances = tables.index("instance");
  auto categories = tables.index("category");
  auto annotations = tables.index("sample_annotation");

  auto channel_of = [&](const json& sd) -> std::string {
    const auto cs = calibrated.find(sd.at("calibrated_sensor_token").get<std::string>());
    if (cs == calibrated.end()) throw IngestionError("sample_data references unknown calibrated_sensor");
    const auto s = sensors.find(cs->second->at("sensor_token").get<std::string>());
    if (s == sensors.end()) throw IngestionError("calibrated_sensor references unknown sensor");
    return s->second->at("channel");
  };

  std::unordered_map<std::string, KeyframeRefs> by_sample;
  for (const auto& sd : tables.get("sample_data")) {
    if (!sd.value("is_key_frame", false)) continue;
    const std::string st = sd.at("sample_token");
    by_sample[st].sensor_data[channel_of(sd)] = &sd;
  }
  std::unordered_map<std::string, std::vector<const json*>> anns_by_sample;
  for (const auto& a : tables.get("sample_annotation")) anns_by_sample[a.at("sample_token").get<std::string>()].push_back(&a);

  // Keyframes ordered by scene name, then along each scene's linked list.
  std::vector<const json*> scenes;
  for (const auto& sc : tables.get("scene")) scenes.push_back(&sc);
  std::sort(scenes.begin(), scenes.end(),
            [](const json* a, const json* b) { return a->at("name").get<std::string>() < b->at("name").get<std::string>(); });

  struct Keyframe {
    std::string scene;
    std::string token;
  };
  std::vector<Keyframe> ordered;
  for (const json* sc : scenes) {
    std::string tok = sc->at("first_sample_token");
    while (!tok.empty()) {
      const auto it = samples.find(tok);
      if (it == samples.end()) throw IngestionError("scene " + sc->at("name").get<std::string>() + " links to unknown sample");
      ordered.push_back({sc->at("name"), tok});
      tok = it->second->at("next").get<std::string>();
    }
  }

  NuScenesLoadReport local;
  std::vector<std::pair<std::string, SceneFrame>> frames;  // (scene name, frame)
  std::map<std::string, CameraRig> rigs;
  const auto& cams = nuscenes_camera_channels();

  for (const auto& kf : ordered) {
    auto& refs = by_sample[kf.token];
    bool complete = true;
    for (const auto& ch : cams) complete = complete && refs.sensor_data.count(ch);
    complete = complete && refs.sensor_data.count(options.radar_channel);
    if (complete) {
      for (const auto& [ch, sd] : refs.sensor_data) {
        if ((std::find(cams.begin(), cams.end(), ch) != cams.end() || ch == options.radar_channel) &&
            !fs::exists(root / sd->at("filename").get<std::string>()))
          complete = false;
      }
    }
    if (!complete) {
      ++local.skipped_samples;
      continue;
    }

    // Ego pose from the radar keyframe; annotations are moved into that ego frame.
    const json& radar_sd = *refs.sensor_data.at(options.radar_channel);
    const auto ep = ego_poses.find(radar_sd.at("ego_pose_token").get<std::string>());
    if (ep == ego_poses.end()) throw IngestionError("sample_data references unknown ego_pose");
    const Pose ego = pose_from(*ep->second);

    SceneFrame frame;
    CameraRig rig;
    for (const auto& ch : cams) {
      const json& sd = *refs.sensor_data.at(ch);
      const json& cs = *calibrated.at(sd.at("calibrated_sensor_token").get<std::string>());
      const Pose sensor = pose_from(cs);
      const auto& k = cs.at("camera_intrinsic");
      const double w = sd.value("width", 1600);
      const double h = sd.value("height", 900);
      const double sx = options.image_size / w;
      const double sy = options.image_size / h;
      rig.views.push_back(PinholeCamera::from_sensor_pose(
          k.at(0).at(0).get<double>() * sx, k.at(1).at(1).get<double>() * sy,
          (k.at(0).at(2).get<double>() + 0.5) * sx - 0.5, (k.at(1).at(2).get<double>() + 0.5) * sy - 0.5,
          options.image_size, options.image_size, sensor.rotation, sensor.translation));
      frame.camera_views.push_back(load_camera_image(root / sd.at("filename").get<std::string>(), options.image_size));
    }

    {
      const json& cs = *calibrated.at(radar_sd.at("calibrated_sensor_token").get<std::string>());
      const Pose sensor = pose_from(cs);
      const auto pcd = read_pcd(root / radar_sd.at("filename").get<std::string>());
      const int ix = pcd.column("x"), iy = pcd.column("y"), iz = pcd.column("z");
      int ivx = pcd.column("vx_comp"), ivy = pcd.column("vy_comp");
      if (ivx < 0 || ivy < 0) {
        ivx = pcd.column("vx");
        ivy = pcd.column("vy");
      }
      if (ix < 0 || iy < 0 || iz < 0) throw IngestionError("radar PCD lacks x/y/z fields");
      const std::size_t nf = pcd.fields.size();
      for (std::size_t p = 0; p < pcd.points; ++p) {
        const float* row = pcd.values.data() + p * nf;
        const Eigen::Vector3d pe = sensor.rotation * Eigen::Vector3d(row[ix], row[iy], row[iz]) + sensor.translation;
        double radial = 0.0;
        if (ivx >= 0 && ivy >= 0) {
          const Eigen::Vector3d ve = sensor.rotation * Eigen::Vector3d(row[ivx], row[ivy], 0.0);
          const double r = std::hypot(pe.x(), pe.y());
          if (r > 1e-9) radial = (ve.x() * pe.x() + ve.y() * pe.y()) / r;
        }
        frame.radar_points.push_back({static_cast<float>(pe.x()), static_cast<float>(pe.y()), static_cast<float>(pe.z()),
                                      static_cast<float>(radial)});
      }
    }

    const std::int64_t ts = samples.at(kf.token)->at("timestamp").get<std::int64_t>();
    int vid = 0;
    for (const json* a : anns_by_sample[kf.token]) {
      const auto inst = instances.find(a->at("instance_token").get<std::string>());
      if (inst == instances.end()) continue;
      const auto cat = categories.find(inst->second->at("category_token").get<std::string>());
      if (cat == categories.end() || cat->second->at("name").get<std::string>().rfind("vehicle.", 0) != 0) continue;
      const Pose box = pose_from(*a);
      const Eigen::Vector3d c = ego.rotation.transpose() * (box.translation - ego.translation);
      const Eigen::Matrix3d r = ego.rotation.transpose() * box.rotation;
      VehicleState v;
      v.id = vid++;
      v.x = c.x();
      v.y = c.y();
      v.heading = std::atan2(r(1, 0), r(0, 0));
      v.width = a->at("size").at(0).get<double>();
      v.length = a->at("size").at(1).get<double>();
      // Velocity by central difference over neighbouring annotations of the same instance.
      const std::string prev = a->value("prev", ""), next = a->value("next", "");
      const json* pa = prev.empty() || !annotations.count(prev) ? a : annotations.at(prev);
      const json* na = next.empty() || !annotations.count(next) ? a : annotations.at(next);
      if (pa != na) {
        const double t0 = samples.at(pa->at("sample_token").get<std::string>())->at("timestamp").get<std::int64_t>() * 1e-6;
        const double t1 = samples.at(na->at("sample_token").get<std::string>())->at("timestamp").get<std::int64_t>() * 1e-6;
        if (t1 > t0) {
          const Eigen::Vector3d dv =
              ego.rotation.transpose() * (pose_from(*na).translation - pose_from(*pa).translation) / (t1 - t0);
          v.vx = dv.x();
          v.vy = dv.y();
        }
      }
      frame.vehicle_states.push_back(v);
    }
    frame.gt_mask = rasterize(frame.vehicle_states, options.grid);
    frame.timestamp_s = static_cast<double>(ts) * 1e-6;
    rigs.emplace(kf.scene, rig);
    frames.emplace_back(kf.scene, std::move(frame));
  }

  local.total_samples = frames.size();
  local.train_samples = std::min(options.train_samples, frames.size());
  local.test_samples = frames.size() - local.train_samples;
  if (report) *report = local;

  // Group the selected split's frames into per-scene sequences with nominal 0.5 s keyframe spacing.
  constexpr double kKeyframeInterval = 0.5;
  std::vector<SceneSequence> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const bool is_train = i < local.train_samples;
    if ((split == "train" && !is_train) || (split == "test" && is_train)) continue;
    const std::string id = frames[i].first + (is_train ? "-train" : "-test");
    if (out.empty() || out.back().scene_id != id) {
      SceneSequence seq;
      seq.scene_id = id;
      seq.style = "nuscenes";
      seq.delta_t_s = kKeyframeInterval;
      seq.grid = options.grid;
      seq.rig = rigs.at(frames[i].first);
      out.push_back(std::move(seq));
    }
    auto& seq = out.back();
    SceneFrame f = std::move(frames[i].second);
    f.frame_id = static_cast<int>(seq.frames.size());
    f.timestamp_s = f.frame_id * kKeyframeInterval;
    seq.frames.push_back(std::move(f));
  }
  return out;
}

}  // namespace bevlink
