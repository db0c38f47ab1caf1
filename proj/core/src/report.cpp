#include "bevlink/report.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "bevlink/errors.hpp"
#include "json.hpp"

namespace bevlink {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string format_number(double v, const char* fmt) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

const std::vector<std::string>& family_order() {
  static const std::vector<std::string> order{"lossless", "awgn", "awgn+diffusion", "digital"};
  return order;
}

cv::Scalar family_color(const std::string& family) {
  if (family == "lossless") return {40, 40, 40};
  if (family == "awgn") return {200, 90, 30};
  if (family == "awgn+diffusion") return {40, 150, 40};
  return {40, 40, 200};
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + file.string());
  os << text;
  if (!os) throw Error("failed writing " + file.string());
}

cv::Mat mask_image(const std::vector<std::uint8_t>& pixels, int size, int scale) {
  cv::Mat m(size, size, CV_8UC1);
  std::copy(pixels.begin(), pixels.end(), m.data);
  // Row 0 is the most negative y; flip so +y points up in the image.
  cv::Mat flipped, big;
  cv::flip(m, flipped, 0);
  cv::resize(flipped, big, {size * scale, size * scale}, 0, 0, cv::INTER_NEAREST);
  return big;
}

std::string safe_name(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

void draw_curves(const std::vector<CurvePoint>& points, const fs::path& file) {
  const int w = 900, h = 600, left = 80, right = 220, top = 40, bottom = 70;
  cv::Mat img(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
  double xmin = 1e9, xmax = -1e9;
  for (const auto& p : points) {
    xmin = std::min(xmin, p.snr_db);
    xmax = std::max(xmax, p.snr_db);
  }
  if (xmax <= xmin) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  auto px = [&](double snr) { return left + static_cast<int>((snr - xmin) / (xmax - xmin) * (w - left - right)); };
  auto py = [&](double iou) { return top + static_cast<int>((1.0 - std::clamp(iou, 0.0, 1.0)) * (h - top - bottom)); };

  cv::rectangle(img, {left, top}, {w - right, h - bottom}, {0, 0, 0}, 1);
  for (int i = 0; i <= 10; ++i) {
    const double v = i / 10.0;
    cv::line(img, {left - 5, py(v)}, {left, py(v)}, {0, 0, 0});
    cv::putText(img, format_number(v, "%.1f"), {left - 45, py(v) + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0});
  }
  std::set<double> ticks;
  for (const auto& p : points) ticks.insert(p.snr_db);
  for (double t : ticks) {
    cv::line(img, {px(t), h - bottom}, {px(t), h - bottom + 5}, {0, 0, 0});
    cv::putText(img, format_number(t, "%g"), {px(t) - 10, h - bottom + 22}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0});
  }
  cv::putText(img, "SNR (dB)", {(w - right + left) / 2 - 30, h - 20}, cv::FONT_HERSHEY_SIMPLEX, 0.55, {0, 0, 0});
  cv::putText(img, "IoU", {15, top + 15}, cv::FONT_HERSHEY_SIMPLEX, 0.55, {0, 0, 0});

  std::map<std::pair<std::string, std::string>, std::vector<CurvePoint>> series;
  for (const auto& p : points) series[{p.family, p.scene_id}].push_back(p);
  int legend_y = top + 10;
  for (const auto& family : family_order()) {
    const cv::Scalar color = family_color(family);
    bool present = false;
    for (auto& [key, pts] : series) {
      if (key.first != family) continue;
      present = true;
      std::sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.snr_db < b.snr_db; });
      const bool aggregate = key.second.empty();
      if (aggregate && family != "awgn+diffusion" && pts.size() > 1) {
        // Mean +/- variance band.
        std::vector<cv::Point> band;
        for (const auto& p : pts) band.emplace_back(px(p.snr_db), py(p.mean + p.variance));
        for (auto it = pts.rbegin(); it != pts.rend(); ++it) band.emplace_back(px(it->snr_db), py(it->mean - it->variance));
        cv::Mat overlay = img.clone();
        cv::fillPoly(overlay, std::vector<std::vector<cv::Point>>{band}, color);
        cv::addWeighted(overlay, 0.2, img, 0.8, 0.0, img);
      }
      const int thickness = aggregate ? 2 : 1;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        cv::line(img, {px(pts[i].snr_db), py(pts[i].mean)}, {px(pts[i + 1].snr_db), py(pts[i + 1].mean)}, color,
                 thickness, cv::LINE_AA);
      for (const auto& p : pts) cv::circle(img, {px(p.snr_db), py(p.mean)}, aggregate ? 4 : 2, color, cv::FILLED);
    }
    if (present) {
      cv::line(img, {w - right + 15, legend_y}, {w - right + 45, legend_y}, color, 2);
      cv::putText(img, family, {w - right + 52, legend_y + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0});
      legend_y += 24;
    }
  }
  if (!cv::imwrite(file.string(), img)) throw Error("cannot write " + file.string());
}

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : result.records) {
    out += r.scene_id + "," + format_number(r.snr_db, "%g") + "," + r.variant + "," + std::to_string(r.seed) + "," +
           std::to_string(r.horizon) + "," + format_number(r.iou, "%.6f") + "," + std::to_string(r.frames) + "," +
           std::to_string(r.outage) + "\n";
  }
  return out;
}

std::vector<CurvePoint> curve_points(const SweepResult& result, int horizon) {
  // (family, snr) -> scene -> seed IoUs, keeping first-seen scene order.
  std::vector<std::string> scenes;
  std::map<std::pair<std::string, double>, std::map<std::string, std::vector<double>>> cells;
  for (const auto& r : result.records) {
    if (r.horizon != horizon) continue;
    if (std::find(scenes.begin(), scenes.end(), r.scene_id) == scenes.end()) scenes.push_back(r.scene_id);
    cells[{r.variant, r.snr_db}][r.scene_id].push_back(r.iou);
  }
  std::vector<CurvePoint> out;
  for (const auto& family : family_order()) {
    for (const auto& [key, per_scene] : cells) {
      if (key.first != family) continue;
      std::vector<double> scene_means;
      for (const auto& scene : scenes) {
        auto it = per_scene.find(scene);
        if (it == per_scene.end()) continue;
        scene_means.push_back(mean_variance(it->second).mean);
      }
      const auto mv = mean_variance(scene_means);
      out.push_back({family, "", key.second, mv.mean, mv.variance});
      if (family == "awgn+diffusion")
        for (const auto& scene : scenes) {
          auto it = per_scene.find(scene);
          if (it != per_scene.end()) out.push_back({family, scene, key.second, mean_variance(it->second).mean, 0.0});
        }
    }
  }
  return out;
}

void save_sweep(const SweepResult& result, const fs::path& file) {
  json j;
  j["metadata"] = {{"checkpoint_id", result.metadata.checkpoint_id},
                   {"config_hash", result.metadata.config_hash},
                   {"timestamp", result.metadata.timestamp}};
  j["records"] = json::array();
  for (const auto& r : result.records)
    j["records"].push_back({{"scene_id", r.scene_id}, {"snr_db", r.snr_db}, {"variant", r.variant}, {"seed", r.seed},
                            {"horizon", r.horizon}, {"iou", r.iou}, {"frames", r.frames}, {"outage", r.outage}});
  j["panels"] = json::array();
  for (const auto& p : result.panels)
    j["panels"].push_back({{"scene_id", p.scene_id}, {"snr_db", p.snr_db}, {"frame", p.frame}, {"horizon", p.horizon},
                           {"size", p.size}, {"before", p.before}, {"after", p.after}, {"ground_truth", p.ground_truth}});
  write_text(file, j.dump());
}

SweepResult load_sweep(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IngestionError("cannot open sweep file " + file.string());
  SweepResult out;
  try {
    const json j = json::parse(is);
    const auto& m = j.at("metadata");
    out.metadata = {m.at("checkpoint_id").get<std::string>(), m.at("config_hash").get<std::string>(),
                    m.at("timestamp").get<std::string>()};
    for (const auto& r : j.at("records"))
      out.records.push_back({r.at("scene_id").get<std::string>(), r.at("snr_db").get<double>(),
                             r.at("variant").get<std::string>(), r.at("seed").get<int>(), r.at("horizon").get<int>(),
                             r.at("iou").get<double>(), r.at("frames").get<int>(), r.at("outage").get<int>()});
    for (const auto& p : j.at("panels")) {
      ScenePanel panel{p.at("scene_id").get<std::string>(), p.at("snr_db").get<double>(), p.at("frame").get<int>(),
                       p.at("horizon").get<int>(), p.at("size").get<int>(),
                       p.at("before").get<std::vector<std::uint8_t>>(), p.at("after").get<std::vector<std::uint8_t>>(),
                       p.at("ground_truth").get<std::vector<std::uint8_t>>()};
      const auto n = static_cast<std::size_t>(panel.size) * static_cast<std::size_t>(panel.size);
      if (panel.before.size() != n || panel.after.size() != n || panel.ground_truth.size() != n)
        throw IngestionError("panel image size mismatch in " + file.string());
      out.panels.push_back(std::move(panel));
    }
  } catch (const json::exception& e) {
    throw IngestionError("malformed sweep file " + file.string() + ": " + e.what());
  }
  return out;
}

ReportFiles emit_report(const SweepResult& result, const fs::path& out_dir) {
  if (result.records.empty()) throw ValidationError("cannot report an empty sweep");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw Error("output directory is not writable: " + out_dir.string());

  ReportFiles files;
  files.csv = out_dir / "sweep.csv";
  write_text(files.csv, sweep_csv(result));

  int horizon = result.records.front().horizon;
  for (const auto& r : result.records) horizon = std::min(horizon, r.horizon);
  const auto points = curve_points(result, horizon);
  files.curves_csv = out_dir / "curves.csv";
  std::string curves = "family,scene_id,snr_db,mean,variance\n";
  for (const auto& p : points)
    curves += p.family + "," + p.scene_id + "," + format_number(p.snr_db, "%g") + "," +
              format_number(p.mean, "%.6f") + "," + format_number(p.variance, "%.6f") + "\n";
  write_text(files.curves_csv, curves);
  files.curves_png = out_dir / "curves.png";
  draw_curves(points, files.curves_png);

  if (!result.panels.empty()) {
    const fs::path dir = out_dir / "panels";
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string());
    constexpr int kScale = 4;
    const cv::Scalar sep(128);
    std::map<std::string, std::vector<const ScenePanel*>> by_scene;
    for (const auto& p : result.panels) {
      by_scene[p.scene_id].push_back(&p);
      std::vector<cv::Mat> row{mask_image(p.before, p.size, kScale), cv::Mat(p.size * kScale, 4, CV_8UC1, sep),
                               mask_image(p.after, p.size, kScale), cv::Mat(p.size * kScale, 4, CV_8UC1, sep),
                               mask_image(p.ground_truth, p.size, kScale)};
      cv::Mat triplet;
      cv::hconcat(row, triplet);
      const auto file = dir / ("panel_" + safe_name(p.scene_id) + "_h" + std::to_string(p.horizon) + ".png");
      if (!cv::imwrite(file.string(), triplet)) throw Error("cannot write " + file.string());
      files.panels.push_back(file);
    }
    for (const auto& [scene, panels] : by_scene) {
      std::vector<cv::Mat> top, bottom;
      for (const auto* p : panels) {
        if (p->horizon == 0) continue;
        top.push_back(mask_image(p->after, p->size, kScale));
        bottom.push_back(mask_image(p->ground_truth, p->size, kScale));
      }
      if (top.empty()) continue;
      cv::Mat a, b, strip;
      cv::hconcat(top, a);
      cv::hconcat(bottom, b);
      cv::vconcat(std::vector<cv::Mat>{a, cv::Mat(4, a.cols, CV_8UC1, sep), b}, strip);
      const auto file = dir / ("strip_" + safe_name(scene) + ".png");
      if (!cv::imwrite(file.string(), strip)) throw Error("cannot write " + file.string());
      files.panels.push_back(file);
    }
  }
  return files;
}

}  // namespace bevlink
