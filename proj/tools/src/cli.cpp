#include "bevlink/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "CLI11.hpp"
#include "bevlink/checkpoint.hpp"
#include "bevlink/config.hpp"
#include "bevlink/dataset_io.hpp"
#include "bevlink/errors.hpp"
#include "bevlink/evaluation.hpp"
#include "bevlink/nuscenes.hpp"
#include "bevlink/report.hpp"
#include "bevlink/rng.hpp"
#include "bevlink/training.hpp"

namespace bevlink {

namespace fs = std::filesystem;

namespace {

constexpr const char* kUsage =
    "usage: bevlink <command> [options]\n"
    "commands:\n"
    "  dataset synth      generate a synthetic BEV dataset\n"
    "  dataset nuscenes   convert nuScenes-mini into a dataset directory\n"
    "  train              run one training stage (--stage 1|2|3)\n"
    "  eval sweep         SNR sweep over variants, seeds and horizons\n"
    "  eval checkpoint    mean/variance IoU of one checkpoint\n"
    "  predict            export refined and forecast masks for one frame\n"
    "  report             CSV, curves and panels from a sweep directory\n"
    "run 'bevlink <command> --help' for options\n";

struct UsageError : Error {
  using Error::Error;
};

fs::path output_dir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty()) return fs::path(flag);
  const char* root = std::getenv(kOutRootEnv);
  return fs::path(root && *root ? root : "runs") / fallback;
}

// One experiment per directory: refuse to touch an existing non-empty directory without --force.
void claim_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw Error("output path is not a directory: " + dir.string());
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw Error("output directory already exists: " + dir.string() + " (pass --force to overwrite)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + file.string());
  os << text;
}

void write_config_snapshot(const fs::path& dir, const ExperimentConfig& config) {
  write_file(dir / "config.ini", config.to_text());
  write_file(dir / "config.hash", config.hash() + "\n");
}

ExperimentConfig config_or_default(const std::string& file) {
  return file.empty() ? ExperimentConfig{} : load_config(file);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_mask_png(const fs::path& file, const torch::Tensor& probs, int scale = 4) {
  auto u8 = (probs.clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
  const int g = static_cast<int>(u8.size(0));
  cv::Mat m(g, g, CV_8UC1, u8.data_ptr<std::uint8_t>());
  cv::Mat flipped, big;
  cv::flip(m, flipped, 0);
  cv::resize(flipped, big, {g * scale, g * scale}, 0, 0, cv::INTER_NEAREST);
  if (!cv::imwrite(file.string(), big)) throw Error("cannot write " + file.string());
}

struct DatasetSynthArgs {
  SynthDatasetOptions options;
  std::string config;
  std::string out;
  bool force = false;
};

struct NuScenesArgs {
  std::string root;
  std::string out;
  std::string radar_channel = "RADAR_FRONT";
  std::string config;
  bool force = false;
};

struct TrainArgs {
  int stage = 0;
  std::string config;
  std::string data;
  std::string resume;
  std::uint64_t seed = 0;
  std::string out;
  bool finetune_all = false;
  bool force = false;
  bool quiet = false;
};

struct SweepArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  std::string snr;
  std::string variants;
  int seeds = 0;
  std::string horizons;
  int jobs = 1;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

struct EvalCheckpointArgs {
  std::string ckpt;
  std::string data;
  std::string split = "test";
  std::string snr = "lossless";
  bool diffusion = false;
  int horizon = 0;
  std::uint64_t seed = 0;
};

struct PredictArgs {
  std::string ckpt;
  std::string data;
  std::string scene;
  int frame = 0;
  std::string horizons = "1,2,3";
  double snr = 20.0;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

struct ReportArgs {
  std::string in;
  std::string out;
  bool force = false;
};

int do_dataset_synth(const DatasetSynthArgs& a, std::ostream& out) {
  ExperimentConfig config = config_or_default(a.config);
  SynthDatasetOptions opt = a.options;
  config.data.grid_size = opt.grid_size;
  config.data.extent_m = opt.extent_m;
  config.data.frames_per_scene = opt.num_frames;
  config.data.image_size = opt.image_size;
  config.data.num_views = opt.num_views;
  config = validate_config(config.to_text());
  const auto dir = output_dir(a.out, "dataset");
  claim_output_dir(dir, a.force);
  const auto dataset = generate_dataset(opt);
  save_dataset(dataset, dir);
  write_config_snapshot(dir, config);
  out << "wrote " << dataset.sequences.size() << " sequences (" << dataset.frame_count() << " frames) to "
      << dir.string() << "\n";
  return 0;
}

int do_dataset_nuscenes(const NuScenesArgs& a, std::ostream& out) {
  ExperimentConfig config = config_or_default(a.config);
  NuScenesOptions opt;
  opt.radar_channel = a.radar_channel;
  opt.image_size = config.data.image_size;
  opt.grid = BevGridSpec::centered(config.data.extent_m, config.data.grid_size);
  NuScenesLoadReport train_report, test_report;
  auto train = load_nuscenes_mini(a.root, "train", opt, &train_report);
  auto test = load_nuscenes_mini(a.root, "test", opt, &test_report);
  const auto dir = output_dir(a.out, "nuscenes");
  claim_output_dir(dir, a.force);
  Dataset ds;
  ds.source = "nuscenes";
  ds.delta_t_s = 0.5;
  ds.grid = opt.grid;
  for (auto& s : train) ds.add(std::move(s), "train");
  for (auto& s : test) ds.add(std::move(s), "test");
  save_dataset(ds, dir);
  write_config_snapshot(dir, config);
  out << "samples: total " << train_report.total_samples << ", train " << train_report.train_samples << ", test "
      << test_report.test_samples << ", skipped " << train_report.skipped_samples << "\n";
  return 0;
}

int do_train(const TrainArgs& a, std::ostream& out) {
  std::optional<Checkpoint> prev;
  if (!a.resume.empty()) prev = load_checkpoint(a.resume);
  if (a.stage > 1 && !prev)
    throw PrerequisiteError("stage " + std::to_string(a.stage) + " requires --resume with a stage-" +
                            std::to_string(a.stage - 1) + " checkpoint");
  ExperimentConfig config = !a.config.empty() ? load_config(a.config) : prev ? prev->config : ExperimentConfig{};
  if (a.finetune_all) config.train.finetune_all = true;
  if (a.data.empty()) throw UsageError("train requires --data");
  const auto dataset = load_dataset(a.data);
  const auto dir = output_dir(a.out, "train-stage" + std::to_string(a.stage));
  claim_output_dir(dir, a.force);
  std::ofstream log(dir / "train.log");
  auto progress = [&](const std::string& line) {
    log << line << "\n";
    log.flush();
    if (!a.quiet) out << line << "\n";
  };
  const auto ckpt = train(a.stage, config, dataset, prev ? &*prev : nullptr, a.seed, progress);
  const auto file = dir / ("stage" + std::to_string(a.stage) + ".ckpt");
  save_checkpoint(ckpt, file);
  write_config_snapshot(dir, config);
  out << "checkpoint " << ckpt.id() << " written to " << file.string() << "\n";
  return 0;
}

int do_eval_sweep(const SweepArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.ckpt);
  const auto& cfg = ckpt.config;
  SweepOptions opt;
  opt.snr_list = a.snr.empty() ? cfg.eval.snr_list : parse_double_list(a.snr);
  opt.variants = a.variants.empty() ? cfg.eval.variants : parse_string_list(a.variants);
  opt.seeds = a.seeds > 0 ? a.seeds : cfg.eval.seeds;
  opt.horizons = a.horizons.empty() ? cfg.eval.horizons : parse_int_list(a.horizons);
  opt.jobs = a.jobs;
  opt.threshold = a.threshold > 0.0 ? a.threshold : cfg.eval.threshold;
  opt.base_seed = a.seed;
  const auto dataset = load_dataset(a.data).subset(a.split);
  if (dataset.sequences.empty()) throw ValidationError("dataset has no '" + a.split + "' sequences");
  const auto dir = output_dir(a.out, "sweep");
  claim_output_dir(dir, a.force);
  auto result = snr_sweep(ckpt, dataset, opt);
  result.metadata.timestamp = utc_timestamp();
  save_sweep(result, dir / "sweep.json");
  write_file(dir / "sweep.csv", sweep_csv(result));
  write_config_snapshot(dir, cfg);
  out << result.records.size() << " records written to " << dir.string() << "\n";
  return 0;
}

int do_eval_checkpoint(const EvalCheckpointArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.ckpt);
  const auto dataset = load_dataset(a.data).subset(a.split);
  EvalRequest req;
  if (a.snr != "lossless") {
    const auto v = parse_double_list(a.snr);
    if (v.size() != 1) throw UsageError("--snr takes one value or 'lossless'");
    req.snr_db = v.front();
  }
  req.use_diffusion = a.diffusion;
  req.horizon = a.horizon;
  req.seed = a.seed;
  req.threshold = ckpt.config.eval.threshold;
  const auto result = evaluate_checkpoint(ckpt, dataset, req);
  out << std::fixed << std::setprecision(6);
  for (const auto& [scene, mv] : result.per_scene)
    out << scene << " mean " << mv.mean << " variance " << mv.variance << " frames " << mv.count << "\n";
  out << "overall mean " << result.overall.mean << " variance " << result.overall.variance << " frames "
      << result.overall.count << "\n";
  return 0;
}

int do_predict(const PredictArgs& a, std::ostream& out) {
  const auto ckpt = load_checkpoint(a.ckpt);
  if (ckpt.stage < 3) throw PrerequisiteError("predict requires a stage-3 checkpoint");
  const auto dataset = load_dataset(a.data);
  const SceneSequence* seq = nullptr;
  for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
    const auto& s = dataset.sequences[i];
    if ((a.scene.empty() && dataset.splits[i] == "test") || s.scene_id == a.scene) {
      seq = &s;
      break;
    }
  }
  if (!seq) throw ValidationError(a.scene.empty() ? "dataset has no test scene" : "unknown scene '" + a.scene + "'");
  const auto horizons = parse_int_list(a.horizons);
  for (int h : horizons) {
    validate_horizon(h);
    if (a.frame + h >= static_cast<int>(seq->frames.size()))
      throw ValidationError("frame " + std::to_string(a.frame) + " + horizon " + std::to_string(h) +
                            " is past the end of the sequence");
  }
  if (a.frame < 0) throw ValidationError("--frame must be non-negative");
  auto nets = restore_networks(ckpt);
  const auto prepared = prepare_sequence(*seq);
  const auto dir = output_dir(a.out, "predict");
  claim_output_dir(dir, a.force);

  auto batch = collate({FrameRef{&prepared, a.frame}});
  const auto noise = frame_noise_seed(a.seed, seq->scene_id, a.frame, a.snr);
  auto condition = decode_masks(nets, batch, Variant::awgn, SnrDb{a.snr}, 0, {noise}, {}).probs;
  write_mask_png(dir / "condition.png", condition[0]);
  write_mask_png(dir / "gt_h0.png", prepared.frames[static_cast<std::size_t>(a.frame)].gt);
  std::vector<cv::Mat> top, bottom;
  for (int h : horizons) {
    auto pred = sample_masks(nets.denoiser, condition, {h}, nets.schedule(),
                             {derive_seed(noise, {static_cast<std::uint64_t>(h) + 1})});
    const auto& gt = prepared.frames[static_cast<std::size_t>(a.frame + h)].gt;
    write_mask_png(dir / ("pred_h" + std::to_string(h) + ".png"), pred[0]);
    write_mask_png(dir / ("gt_h" + std::to_string(h) + ".png"), gt);
    top.push_back(cv::imread((dir / ("pred_h" + std::to_string(h) + ".png")).string(), cv::IMREAD_GRAYSCALE));
    bottom.push_back(cv::imread((dir / ("gt_h" + std::to_string(h) + ".png")).string(), cv::IMREAD_GRAYSCALE));
    const auto score = batch_iou(pred, gt.unsqueeze(0), ckpt.config.eval.threshold).front();
    out << "h=" << h << " iou " << std::fixed << std::setprecision(6) << score << "\n";
  }
  cv::Mat a_row, b_row, strip;
  cv::hconcat(top, a_row);
  cv::hconcat(bottom, b_row);
  cv::vconcat(std::vector<cv::Mat>{a_row, b_row}, strip);
  if (!cv::imwrite((dir / "strip.png").string(), strip)) throw Error("cannot write strip.png");
  write_config_snapshot(dir, ckpt.config);
  return 0;
}

int do_report(const ReportArgs& a, std::ostream& out) {
  const fs::path in(a.in);
  const auto result = load_sweep(in / "sweep.json");
  const auto dir = output_dir(a.out, "report");
  claim_output_dir(dir, a.force);
  const auto files = emit_report(result, dir);
  if (fs::exists(in / "config.ini")) {
    fs::copy_file(in / "config.ini", dir / "config.ini", fs::copy_options::overwrite_existing);
    fs::copy_file(in / "config.hash", dir / "config.hash", fs::copy_options::overwrite_existing);
  }
  out << "report written to " << dir.string() << " (" << files.panels.size() << " panel images)\n";
  return 0;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << kUsage;
    return 2;
  }
  static const std::vector<std::string> known{"dataset", "train", "eval", "predict", "report"};
  if (std::find(known.begin(), known.end(), args.front()) == known.end()) {
    if (args.front() == "--help" || args.front() == "-h") {
      out << kUsage;
      return 0;
    }
    err << "error: unknown command '" << args.front() << "'\n" << kUsage;
    return 2;
  }

  CLI::App app{"bevlink: analog semantic BEV link experiments", "bevlink"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  DatasetSynthArgs synth;
  NuScenesArgs nus;
  TrainArgs tr;
  SweepArgs sw;
  EvalCheckpointArgs ec;
  PredictArgs pr;
  ReportArgs rp;
  std::function<int()> action;

  auto* dataset = app.add_subcommand("dataset", "create a dataset directory");
  dataset->require_subcommand(1);
  auto* ds_synth = dataset->add_subcommand("synth", "generate synthetic constant-velocity scenes");
  ds_synth->add_option("--seed", synth.options.seed, "dataset seed");
  ds_synth->add_option("--num-scenes", synth.options.num_scenes, "number of sequences")->check(CLI::PositiveNumber);
  ds_synth->add_option("--style", synth.options.style, "A, B, C or mixed")
      ->check(CLI::IsMember({"A", "B", "C", "mixed"}));
  ds_synth->add_option("--grid-size", synth.options.grid_size, "BEV cells per side");
  ds_synth->add_option("--extent", synth.options.extent_m, "half extent of the grid in metres");
  ds_synth->add_option("--frames", synth.options.num_frames, "frames per sequence");
  ds_synth->add_option("--image-size", synth.options.image_size, "camera image side in pixels");
  ds_synth->add_option("--views", synth.options.num_views, "surround camera count");
  ds_synth->add_option("--test-fraction", synth.options.test_fraction, "trailing share of test scenes")
      ->check(CLI::Range(0.0, 1.0));
  ds_synth->add_option("--config", synth.config, "config file recorded with the dataset");
  ds_synth->add_option("--out", synth.out, "output directory");
  ds_synth->add_flag("--force", synth.force, "overwrite an existing output directory");
  ds_synth->callback([&] { action = [&] { return do_dataset_synth(synth, out); }; });

  auto* ds_nus = dataset->add_subcommand("nuscenes", "convert nuScenes-mini keyframes");
  ds_nus->add_option("--root", nus.root, "nuScenes root (contains v1.0-mini/ and samples/)")->required();
  ds_nus->add_option("--radar-channel", nus.radar_channel, "radar sensor channel");
  ds_nus->add_option("--config", nus.config, "config file (grid and image size)");
  ds_nus->add_option("--out", nus.out, "output directory");
  ds_nus->add_flag("--force", nus.force, "overwrite an existing output directory");
  ds_nus->callback([&] { action = [&] { return do_dataset_nuscenes(nus, out); }; });

  auto* train_cmd = app.add_subcommand("train", "run one training stage");
  train_cmd->add_option("--stage", tr.stage, "stage 1, 2 or 3")->required()->check(CLI::Range(1, 3));
  train_cmd->add_option("--config", tr.config, "config file");
  train_cmd->add_option("--data", tr.data, "dataset directory")->required();
  train_cmd->add_option("--resume", tr.resume, "previous-stage checkpoint");
  train_cmd->add_option("--seed", tr.seed, "training seed");
  train_cmd->add_option("--out", tr.out, "output directory");
  train_cmd->add_flag("--finetune-all", tr.finetune_all, "also update earlier-stage weights (stage 2)");
  train_cmd->add_flag("--force", tr.force, "overwrite an existing output directory");
  train_cmd->add_flag("--quiet", tr.quiet, "do not echo per-epoch progress");
  train_cmd->callback([&] { action = [&] { return do_train(tr, out); }; });

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints");
  eval->require_subcommand(1);
  auto* sweep = eval->add_subcommand("sweep", "SNR x variant x seed x horizon sweep");
  sweep->add_option("--ckpt", sw.ckpt, "checkpoint file")->required();
  sweep->add_option("--data", sw.data, "dataset directory")->required();
  sweep->add_option("--split", sw.split, "dataset split to evaluate");
  sweep->add_option("--snr", sw.snr, "comma-separated SNR list in dB");
  sweep->add_option("--variants", sw.variants, "comma-separated variants");
  sweep->add_option("--seeds", sw.seeds, "number of noise seeds");
  sweep->add_option("--horizons", sw.horizons, "comma-separated horizons");
  sweep->add_option("--jobs", sw.jobs, "parallel workers")->check(CLI::PositiveNumber);
  sweep->add_option("--threshold", sw.threshold, "binarization threshold")->check(CLI::Range(0.0, 1.0));
  sweep->add_option("--seed", sw.seed, "base seed");
  sweep->add_option("--out", sw.out, "output directory");
  sweep->add_flag("--force", sw.force, "overwrite an existing output directory");
  sweep->callback([&] { action = [&] { return do_eval_sweep(sw, out); }; });

  auto* evck = eval->add_subcommand("checkpoint", "mean and variance IoU of one configuration");
  evck->add_option("--ckpt", ec.ckpt, "checkpoint file")->required();
  evck->add_option("--data", ec.data, "dataset directory")->required();
  evck->add_option("--split", ec.split, "dataset split to evaluate");
  evck->add_option("--snr", ec.snr, "SNR in dB or 'lossless'");
  evck->add_flag("--diffusion", ec.diffusion, "refine with the diffusion model");
  evck->add_option("--horizon", ec.horizon, "prediction horizon");
  evck->add_option("--seed", ec.seed, "noise seed");
  evck->callback([&] { action = [&] { return do_eval_checkpoint(ec, out); }; });

  auto* predict = app.add_subcommand("predict", "export refined and forecast masks");
  predict->add_option("--ckpt", pr.ckpt, "stage-3 checkpoint")->required();
  predict->add_option("--data", pr.data, "dataset directory")->required();
  predict->add_option("--scene", pr.scene, "scene id (default: first test scene)");
  predict->add_option("--frame", pr.frame, "conditioning frame index");
  predict->add_option("--horizons", pr.horizons, "comma-separated horizons");
  predict->add_option("--snr", pr.snr, "channel SNR in dB for the condition");
  predict->add_option("--seed", pr.seed, "noise seed");
  predict->add_option("--out", pr.out, "output directory");
  predict->add_flag("--force", pr.force, "overwrite an existing output directory");
  predict->callback([&] { action = [&] { return do_predict(pr, out); }; });

  auto* report = app.add_subcommand("report", "render a sweep directory");
  report->add_option("--in", rp.in, "sweep output directory")->required();
  report->add_option("--out", rp.out, "output directory");
  report->add_flag("--force", rp.force, "overwrite an existing output directory");
  report->callback([&] { action = [&] { return do_report(rp, out); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << kUsage;
    return 2;
  }

  torch::set_num_threads(1);
  try {
    return action ? action() : 2;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bevlink
