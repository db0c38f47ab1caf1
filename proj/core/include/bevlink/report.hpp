#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bevlink/evaluation.hpp"

namespace bevlink {

inline constexpr const char* kSweepCsvHeader = "scene_id,snr_db,variant,seed,horizon,iou,frames,outage";

/// One row per record in record order; IoU with six decimals.
std::string sweep_csv(const SweepResult& result);

/// Aggregated curve point: per-scene IoU averaged over seeds, then mean and sample variance across scenes.
struct CurvePoint {
  std::string family;    ///< variant name
  std::string scene_id;  ///< empty for the across-scene aggregate
  double snr_db = 0.0;
  double mean = 0.0;
  double variance = 0.0;
};

/// Curve data for the given horizon: one aggregate series per variant present, plus per-scene
/// series for awgn+diffusion.
std::vector<CurvePoint> curve_points(const SweepResult& result, int horizon = 0);

/// Persists a sweep (records, metadata, panels) as JSON and reads it back.
void save_sweep(const SweepResult& result, const std::filesystem::path& file);
SweepResult load_sweep(const std::filesystem::path& file);

struct ReportFiles {
  std::filesystem::path csv;
  std::filesystem::path curves_png;
  std::filesystem::path curves_csv;
  std::vector<std::filesystem::path> panels;
};

/// Writes sweep.csv, curves.png, curves.csv and, when panels are present, panels/*.png
/// (before / after diffusion / ground truth) and horizon strips. Throws Error if `out_dir` is unwritable.
ReportFiles emit_report(const SweepResult& result, const std::filesystem::path& out_dir);

}  // namespace bevlink
