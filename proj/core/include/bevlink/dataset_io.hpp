#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "bevlink/scene.hpp"

namespace bevlink {

/// A set of sequences with a split label per sequence ("train" / "test").
struct Dataset {
  std::string source = "synthetic";
  std::uint64_t seed = 0;
  double delta_t_s = 1.0;
  BevGridSpec grid;
  std::vector<SceneSequence> sequences;
  std::vector<std::string> splits;  ///< parallel to `sequences`

  void add(SceneSequence seq, std::string split);

  /// Sequences carrying the given split label, in dataset order.
  Dataset subset(std::string_view split) const;

  std::size_t frame_count() const;
};

struct SynthDatasetOptions {
  std::uint64_t seed = 7;
  int num_scenes = 10;
  std::string style = "mixed";  ///< A, B, C, or mixed (cycles A, B, C)
  int grid_size = 64;
  double extent_m = 32.0;
  int num_frames = 8;
  int image_size = 128;
  int num_views = 6;
  double test_fraction = 0.4;  ///< trailing share of scenes labelled "test"
};

Dataset generate_dataset(const SynthDatasetOptions& options);

/// Writes `manifest.json` plus one `<scene_id>.cbor` array file per sequence.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Reads a directory written by save_dataset. Throws IngestionError on missing/malformed files.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace bevlink
