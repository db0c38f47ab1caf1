#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bevlink {

struct DataSettings {
  int grid_size = 64;
  double extent_m = 32.0;  ///< grid covers [-extent, extent] in x and y
  int image_size = 128;
  int num_views = 6;
  int frames_per_scene = 8;
  double delta_t_s = 1.0;

  bool operator==(const DataSettings&) const = default;
};

struct EncoderSettings {
  std::string backbone = "small-cnn";     ///< small-cnn | resnet101
  std::string fusion = "concatenation";   ///< concatenation | addition | averaging | ensemble | mixture-of-experts
  std::string overlap = "average";        ///< average | max (multi-camera cells)
  int image_channels = 32;
  int radar_channels = 16;

  bool operator==(const EncoderSettings&) const = default;
};

struct ChannelSettings {
  std::string kind = "awgn";  ///< awgn | digital | rayleigh
  double ratio = 0.25;        ///< channel symbols per source feature value
  double snr_db = 10.0;
  double snr_min_db = 0.0;    ///< training SNR range (stage 2 and 3)
  double snr_max_db = 20.0;
  int hidden_channels = 48;
  int compressed_channels = 16;

  bool operator==(const ChannelSettings&) const = default;
};

struct DiffusionSettings {
  int steps = 100;
  double beta_min = 1e-4;  ///< reference betas for a 1000-step schedule; rescaled by 1000/steps
  double beta_max = 0.02;
  std::vector<int> horizons{0, 1, 2, 3};
  int base_channels = 16;
  std::string placement = "refinement";  ///< refinement | denoising

  bool operator==(const DiffusionSettings&) const = default;
};

struct TrainSettings {
  double lr = 1e-3;
  int batch_size = 8;
  int epochs_stage1 = 30;
  int epochs_stage2 = 30;
  int epochs_stage3 = 50;
  bool finetune_all = false;
  double recon_weight = 1.0;  ///< weight of the stage-2 feature reconstruction term
  double pos_weight = 1.0;    ///< BCE weight on occupied cells
  int val_frames = 16;        ///< frames used for per-epoch validation IoU

  bool operator==(const TrainSettings&) const = default;
};

struct EvalSettings {
  std::vector<double> snr_list{0.0, 5.0, 10.0, 15.0, 20.0};
  double threshold = 0.5;
  int seeds = 3;
  std::vector<std::string> variants{"lossless", "awgn", "awgn+diffusion", "digital"};
  std::vector<int> horizons{0};

  bool operator==(const EvalSettings&) const = default;
};

struct ExperimentConfig {
  DataSettings data;
  EncoderSettings encoder;
  ChannelSettings channel;
  DiffusionSettings diffusion;
  TrainSettings train;
  EvalSettings eval;

  /// Canonical sectioned key=value text listing every key. Parsing it yields an equal config.
  std::string to_text() const;

  /// Hex digest of to_text().
  std::string hash() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses an INI-style document ([section] / key = value). Missing keys take their defaults;
/// unknown sections/keys, type errors and range violations throw ConfigError naming the key.
ExperimentConfig validate_config(std::string_view text);

ExperimentConfig load_config(const std::filesystem::path& file);

/// Parses "0,5,10" style lists.
std::vector<double> parse_double_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);
std::vector<std::string> parse_string_list(std::string_view text);

}  // namespace bevlink
