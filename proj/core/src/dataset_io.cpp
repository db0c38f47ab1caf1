#include "bevlink/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bevlink/errors.hpp"
#include "bevlink/rng.hpp"
#include "json.hpp"

namespace bevlink {

using nlohmann::json;
namespace fs = std::filesystem;

void Dataset::add(SceneSequence seq, std::string split) {
  sequences.push_back(std::move(seq));
  splits.push_back(std::move(split));
}

Dataset Dataset::subset(std::string_view split) const {
  Dataset out;
  out.source = source;
  out.seed = seed;
  out.delta_t_s = delta_t_s;
  out.grid = grid;
  for (std::size_t i = 0; i < sequences.size(); ++i)
    if (splits[i] == split) out.add(sequences[i], splits[i]);
  return out;
}

std::size_t Dataset::frame_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.frames.size();
  return n;
}

Dataset generate_dataset(const SynthDatasetOptions& o) {
  if (o.num_scenes <= 0) throw ValidationError("num_scenes must be positive");
  if (o.test_fraction < 0.0 || o.test_fraction > 1.0) throw ValidationError("test_fraction must be in [0, 1]");
  Dataset ds;
  ds.seed = o.seed;
  ds.grid = BevGridSpec::centered(o.extent_m, o.grid_size);
  const int n_test = static_cast<int>(std::lround(o.num_scenes * o.test_fraction));
  static const char* kCycle[] = {"A", "B", "C"};
  for (int i = 0; i < o.num_scenes; ++i) {
    const std::string style = o.style == "mixed" ? kCycle[i % 3] : o.style;
    SceneParams p = SceneParams::preset(parse_scene_style(style));
    p.num_frames = o.num_frames;
    p.image_size = o.image_size;
    p.num_views = o.num_views;
    auto seq = generate_sequence(derive_seed(o.seed, {static_cast<std::uint64_t>(i)}), p, ds.grid);
    std::ostringstream id;
    id << "scene-" << std::setw(3) << std::setfill('0') << i << "-" << style;
    seq.scene_id = id.str();
    ds.delta_t_s = seq.delta_t_s;
    ds.add(std::move(seq), i >= o.num_scenes - n_test ? "test" : "train");
  }
  return ds;
}

namespace {

json grid_to_json(const BevGridSpec& g) {
  return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max}, {"size", g.size}};
}

BevGridSpec grid_from_json(const json& j) {
  BevGridSpec g{j.at("x_min").get<double>(), j.at("x_max").get<double>(), j.at("y_min").get<double>(),
                j.at("y_max").get<double>(), j.at("size").get<int>()};
  g.validate();
  return g;
}

json rig_to_json(const CameraRig& rig) {
  json views = json::array();
  for (const auto& v : rig.views) {
    json r = json::array();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) r.push_back(v.rotation(i, k));
    views.push_back({{"fx", v.fx}, {"fy", v.fy}, {"cx", v.cx}, {"cy", v.cy}, {"width", v.width},
                     {"height", v.height}, {"rotation", r},
                     {"translation", {v.translation.x(), v.translation.y(), v.translation.z()}}});
  }
  return views;
}

CameraRig rig_from_json(const json& j) {
  CameraRig rig;
  for (const auto& v : j) {
    PinholeCamera cam;
    cam.fx = v.at("fx");
    cam.fy = v.at("fy");
    cam.cx = v.at("cx");
    cam.cy = v.at("cy");
    cam.width = v.at("width");
    cam.height = v.at("height");
    const auto& r = v.at("rotation");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) cam.rotation(i, k) = r.at(i * 3 + k).get<double>();
    const auto& t = v.at("translation");
    cam.translation = Eigen::Vector3d(t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>());
    rig.views.push_back(cam);
  }
  return rig;
}

template <typename T>
json::binary_t pack(const std::vector<T>& values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(T));
  if (!bytes.empty()) std::memcpy(bytes.data(), values.data(), bytes.size());
  return json::binary_t(std::move(bytes));
}

template <typename T>
std::vector<T> unpack(const json& j, std::size_t expected_count, const std::string& what) {
  const auto& bytes = j.get_binary();
  if (bytes.size() != expected_count * sizeof(T)) throw IngestionError("array '" + what + "' has unexpected length");
  std::vector<T> out(expected_count);
  if (!bytes.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

json sequence_to_json(const SceneSequence& seq) {
  json frames = json::array();
  for (const auto& f : seq.frames) {
    json images = json::array();
    int h = 0, w = 0;
    for (const auto& img : f.camera_views) {
      h = img.height;
      w = img.width;
      std::vector<std::uint8_t> q(img.data.size());
      for (std::size_t i = 0; i < q.size(); ++i)
        q[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
      images.push_back(json::binary_t(std::move(q)));
    }
    std::vector<float> radar;
    radar.reserve(f.radar_points.size() * 4);
    for (const auto& p : f.radar_points) radar.insert(radar.end(), {p.x, p.y, p.z, p.radial_velocity});
    json vehicles = json::array();
    for (const auto& v : f.vehicle_states)
      vehicles.push_back({v.id, v.x, v.y, v.heading, v.length, v.width, v.vx, v.vy});
    frames.push_back({{"frame_id", f.frame_id},
                      {"timestamp_s", f.timestamp_s},
                      {"image_height", h},
                      {"image_width", w},
                      {"images", images},
                      {"radar_count", f.radar_points.size()},
                      {"radar", pack(radar)},
                      {"gt_mask", pack(f.gt_mask.cells)},
                      {"vehicles", vehicles}});
  }
  return {{"scene_id", seq.scene_id}, {"style", seq.style},   {"seed", seq.seed}, {"delta_t_s", seq.delta_t_s},
          {"grid", grid_to_json(seq.grid)}, {"rig", rig_to_json(seq.rig)}, {"frames", frames}};
}

SceneSequence sequence_from_json(const json& j) {
  SceneSequence seq;
  seq.scene_id = j.at("scene_id");
  seq.style = j.at("style");
  seq.seed = j.at("seed");
  seq.delta_t_s = j.at("delta_t_s");
  seq.grid = grid_from_json(j.at("grid"));
  seq.rig = rig_from_json(j.at("rig"));
  const int g = seq.grid.size;
  for (const auto& jf : j.at("frames")) {
    SceneFrame f;
    f.frame_id = jf.at("frame_id");
    f.timestamp_s = jf.at("timestamp_s");
    const int h = jf.at("image_height");
    const int w = jf.at("image_width");
    for (const auto& ji : jf.at("images")) {
      const auto q = unpack<std::uint8_t>(ji, static_cast<std::size_t>(h) * w * 3, "image");
      Image img(h, w);
      for (std::size_t i = 0; i < q.size(); ++i) img.data[i] = q[i] / 255.0f;
      f.camera_views.push_back(std::move(img));
    }
    const std::size_t n = jf.at("radar_count");
    const auto radar = unpack<float>(jf.at("radar"), n * 4, "radar");
    for (std::size_t i = 0; i < n; ++i)
      f.radar_points.push_back({radar[4 * i], radar[4 * i + 1], radar[4 * i + 2], radar[4 * i + 3]});
    f.gt_mask.size = g;
    f.gt_mask.cells = unpack<std::uint8_t>(jf.at("gt_mask"), static_cast<std::size_t>(g) * g, "gt_mask");
    for (const auto& jv : jf.at("vehicles")) {
      f.vehicle_states.push_back(VehicleState{jv.at(0).get<int>(), jv.at(1).get<double>(), jv.at(2).get<double>(),
                                              jv.at(3).get<double>(), jv.at(4).get<double>(),
                                              jv.at(5).get<double>(), jv.at(6).get<double>(),
                                              jv.at(7).get<double>()});
    }
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
    const auto& seq = dataset.sequences[i];
    const std::string file = seq.scene_id + ".cbor";
    const auto bytes = json::to_cbor(sequence_to_json(seq));
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / file).string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    entries.push_back({{"scene_id", seq.scene_id},
                       {"file", file},
                       {"split", dataset.splits[i]},
                       {"style", seq.style},
                       {"seed", seq.seed},
                       {"frames", seq.frames.size()}});
  }
  json manifest = {{"format", "bevlink-dataset"},
                   {"version", 1},
                   {"source", dataset.source},
                   {"seed", dataset.seed},
                   {"delta_t_s", dataset.delta_t_s},
                   {"grid", grid_to_json(dataset.grid)},
                   {"sequences", entries}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IngestionError("dataset manifest not found: " + manifest_path.string());
  try {
    std::ifstream in(manifest_path);
    const json manifest = json::parse(in);
    if (manifest.value("format", "") != "bevlink-dataset") throw IngestionError("not a bevlink dataset manifest");
    Dataset ds;
    ds.source = manifest.value("source", "synthetic");
    ds.seed = manifest.value("seed", std::uint64_t{0});
    ds.delta_t_s = manifest.at("delta_t_s");
    ds.grid = grid_from_json(manifest.at("grid"));
    for (const auto& e : manifest.at("sequences")) {
      const fs::path file = dir / e.at("file").get<std::string>();
      std::ifstream f(file, std::ios::binary);
      if (!f) throw IngestionError("sequence file missing: " + file.string());
      std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
      auto seq = sequence_from_json(json::from_cbor(bytes));
      if (!(seq.grid == ds.grid)) throw IngestionError("sequence " + seq.scene_id + " grid differs from manifest");
      ds.add(std::move(seq), e.at("split"));
    }
    return ds;
  } catch (const json::exception& e) {
    throw IngestionError(std::string("malformed dataset: ") + e.what());
  }
}

}  // namespace bevlink
