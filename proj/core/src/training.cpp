#include "bevlink/training.hpp"

#include <cmath>
#include <sstream>

#include "bevlink/errors.hpp"
#include "bevlink/evaluation.hpp"
#include "bevlink/rng.hpp"

namespace bevlink {

namespace {

std::vector<torch::Tensor> parameters_of(Networks& nets, const std::vector<std::string>& names) {
  std::vector<torch::Tensor> out;
  for (const auto& n : names)
    for (auto& p : nets.module(n).parameters()) out.push_back(p);
  return out;
}

void freeze(Networks& nets, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    auto& m = nets.module(n);
    m.eval();
    for (auto& p : m.parameters()) p.set_requires_grad(false);
  }
}

void set_mode(Networks& nets, const std::vector<std::string>& names, bool training) {
  for (const auto& n : names) nets.module(n).train(training);
}

std::vector<FrameRef> all_frames(const std::vector<PreparedSequence>& seqs) {
  std::vector<FrameRef> out;
  for (const auto& s : seqs)
    for (int t = 0; t < static_cast<int>(s.frames.size()); ++t) out.push_back({&s, t});
  return out;
}

std::vector<std::int64_t> permutation(std::int64_t n, torch::Generator& gen) {
  auto perm = torch::randperm(n, gen, torch::TensorOptions().dtype(torch::kInt64));
  return {perm.data_ptr<std::int64_t>(), perm.data_ptr<std::int64_t>() + n};
}

double uniform(torch::Generator& gen, double lo, double hi) {
  return lo + (hi - lo) * torch::rand({1}, gen, torch::TensorOptions().dtype(torch::kFloat64)).item<double>();
}

torch::Tensor shift_zero_fill(const torch::Tensor& t, std::int64_t dy, std::int64_t dx) {
  auto out = torch::roll(t, {dy, dx}, {-2, -1});
  const auto g_rows = t.size(-2), g_cols = t.size(-1);
  if (dy > 0) out.narrow(-2, 0, dy).zero_();
  if (dy < 0) out.narrow(-2, g_rows + dy, -dy).zero_();
  if (dx > 0) out.narrow(-1, 0, dx).zero_();
  if (dx < 0) out.narrow(-1, g_cols + dx, -dx).zero_();
  return out;
}

// Same random row flip and zero-filled shift (up to a quarter grid) for each
// (condition, target) pair. Both keep motion along +x intact.
void augment_pairs(torch::Tensor& condition, torch::Tensor& target, torch::Generator& gen) {
  const auto reach = condition.size(-1) / 4;
  std::vector<torch::Tensor> conds, targets;
  for (std::int64_t i = 0; i < condition.size(0); ++i) {
    auto c = condition[i], x = target[i];
    if (uniform(gen, 0.0, 1.0) < 0.5) {
      c = c.flip({-2});
      x = x.flip({-2});
    }
    const auto dy = static_cast<std::int64_t>(std::floor(uniform(gen, -reach, reach + 1)));
    const auto dx = static_cast<std::int64_t>(std::floor(uniform(gen, -reach, reach + 1)));
    conds.push_back(shift_zero_fill(c, dy, dx));
    targets.push_back(shift_zero_fill(x, dy, dx));
  }
  condition = torch::stack(conds);
  target = torch::stack(targets);
}

torch::Tensor bce(const torch::Tensor& logits, const torch::Tensor& target, double pos_weight) {
  return torch::binary_cross_entropy_with_logits(logits, target, {}, torch::full({1}, pos_weight));
}

// Fused features of every frame with a frozen encoder: [N, C, G, G].
torch::Tensor cache_features(Networks& nets, const std::vector<FrameRef>& frames) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (std::size_t i = 0; i < frames.size(); i += 8) {
    std::vector<FrameRef> chunk(frames.begin() + static_cast<std::ptrdiff_t>(i),
                                frames.begin() + static_cast<std::ptrdiff_t>(std::min(frames.size(), i + 8)));
    parts.push_back(fuse_batch(nets, collate(chunk)));
  }
  return torch::cat(parts, 0);
}

// Cosine decay from the base rate to 5% of it over the stage.
void set_epoch_lr(torch::optim::Adam& opt, double base_lr, int epoch, int epochs) {
  const double progress = epochs > 1 ? static_cast<double>(epoch) / (epochs - 1) : 0.0;
  const double lr = base_lr * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(3.141592653589793 * progress)));
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::string format_epoch(int stage, int epoch, int epochs, double loss, double val) {
  std::ostringstream os;
  os.precision(4);
  os << "stage " << stage << " epoch " << epoch + 1 << "/" << epochs << " loss " << std::fixed << loss;
  if (val >= 0.0) os << " val_iou " << val;
  return os.str();
}

void check_dataset(const ExperimentConfig& config, const Dataset& dataset) {
  if (dataset.sequences.empty()) throw ValidationError("dataset has no sequences");
  if (dataset.grid.size != config.data.grid_size)
    throw ValidationError("dataset grid size " + std::to_string(dataset.grid.size) + " does not match data.grid_size " +
                          std::to_string(config.data.grid_size));
  for (const auto& seq : dataset.sequences) {
    const auto& views = seq.frames.front().camera_views;
    if (static_cast<int>(views.size()) != config.data.num_views || views.front().height != config.data.image_size)
      throw ValidationError("dataset images do not match data.num_views / data.image_size");
  }
}

}  // namespace

bool same_network_shapes(const ExperimentConfig& a, const ExperimentConfig& b, int through_stage) {
  return a.data.grid_size == b.data.grid_size && a.data.image_size == b.data.image_size &&
         a.data.num_views == b.data.num_views && a.encoder.backbone == b.encoder.backbone &&
         a.encoder.fusion == b.encoder.fusion && a.encoder.image_channels == b.encoder.image_channels &&
         a.encoder.radar_channels == b.encoder.radar_channels && a.channel.ratio == b.channel.ratio &&
         a.channel.hidden_channels == b.channel.hidden_channels &&
         a.channel.compressed_channels == b.channel.compressed_channels &&
         (through_stage < 3 || a.diffusion.base_channels == b.diffusion.base_channels);
}

Dataset validation_split(const Dataset& dataset, int val_frames) {
  Dataset pool = dataset.subset("val");
  if (pool.sequences.empty()) pool = dataset.subset("test");
  Dataset out = pool;
  out.sequences.clear();
  out.splits.clear();
  std::size_t frames = 0;
  for (std::size_t i = 0; i < pool.sequences.size() && frames < static_cast<std::size_t>(val_frames); ++i) {
    frames += pool.sequences[i].frames.size();
    out.add(pool.sequences[i], pool.splits[i]);
  }
  return out;
}

void record_link_metrics(Networks& nets, const std::vector<PreparedSequence>& val, std::uint64_t seed,
                         StageMetrics& metrics) {
  metrics.lossless_val_iou = evaluate_networks(nets, val, EvalRequest{std::nullopt, false, 0, seed}).overall.mean;
  metrics.snr_val_iou.clear();
  for (double snr : nets.config().eval.snr_list)
    metrics.snr_val_iou.emplace_back(snr, evaluate_networks(nets, val, EvalRequest{snr, false, 0, seed}).overall.mean);
}

Checkpoint train(int stage, const ExperimentConfig& config, const Dataset& dataset, const Checkpoint* prev,
                 std::uint64_t seed, const ProgressFn& progress) {
  if (stage < 1 || stage > 3) throw ValidationError("stage must be 1, 2 or 3");
  if (stage > 1) {
    if (!prev)
      throw PrerequisiteError("stage " + std::to_string(stage) + " requires a stage-" + std::to_string(stage - 1) +
                              " checkpoint (--resume)");
    if (prev->stage != stage - 1)
      throw PrerequisiteError("stage " + std::to_string(stage) + " requires a stage-" + std::to_string(stage - 1) +
                              " checkpoint, got stage " + std::to_string(prev->stage));
    if (!same_network_shapes(config, prev->config, prev->stage))
      throw ValidationError("config network shapes do not match the previous checkpoint");
  }
  if (stage == 3 && config.train.finetune_all)
    throw ConfigError("train.finetune_all", "only applies to stage 2");
  check_dataset(config, dataset);
  const Dataset train_set = dataset.subset("train");
  if (train_set.sequences.empty()) throw ValidationError("dataset has no train split");
  const Dataset val_set = validation_split(dataset, config.train.val_frames);

  torch::set_num_threads(1);
  auto log = [&](const std::string& msg) {
    if (progress) progress(msg);
  };

  Networks nets(config, seed);
  if (prev) nets.load_state(prev->named_tensors());
  const auto train_seqs = prepare_sequences(train_set);
  const auto val_seqs = prepare_sequences(val_set);
  const auto frames = all_frames(train_seqs);
  const auto n = static_cast<std::int64_t>(frames.size());
  const int batch = config.train.batch_size;
  auto gen = make_generator(derive_seed(seed, {static_cast<std::uint64_t>(stage), fnv1a("train")}));
  const std::uint64_t val_seed = derive_seed(seed, "validation");

  StageMetrics metrics;
  metrics.stage = stage;
  auto val_iou = [&](std::optional<double> snr) {
    return val_seqs.empty() ? 0.0 : evaluate_networks(nets, val_seqs, EvalRequest{snr, false, 0, val_seed}).overall.mean;
  };

  if (stage == 1) {
    const std::vector<std::string> trained{"encoder", "compressor", "seg_decoder"};
    freeze(nets, {"channel_encoder", "channel_decoder", "denoiser"});
    torch::optim::Adam opt(parameters_of(nets, trained), torch::optim::AdamOptions(config.train.lr));
    for (int epoch = 0; epoch < config.train.epochs_stage1; ++epoch) {
      set_epoch_lr(opt, config.train.lr, epoch, config.train.epochs_stage1);
      set_mode(nets, trained, true);
      double total = 0.0;
      const auto order = permutation(n, gen);
      for (std::int64_t i = 0; i < n; i += batch) {
        std::vector<FrameRef> refs;
        for (std::int64_t j = i; j < std::min(n, i + batch); ++j) refs.push_back(frames[static_cast<std::size_t>(order[j])]);
        const auto b = collate(refs);
        opt.zero_grad();
        auto loss = bce(server_logits(nets, fuse_batch(nets, b)), b.gt, config.train.pos_weight);
        loss.backward();
        opt.step();
        total += loss.item<double>() * static_cast<double>(refs.size());
      }
      metrics.epoch_loss.push_back(total / static_cast<double>(n));
      metrics.epoch_val_iou.push_back(val_iou(std::nullopt));
      log(format_epoch(1, epoch, config.train.epochs_stage1, metrics.epoch_loss.back(), metrics.epoch_val_iou.back()));
    }
    metrics.lossless_val_iou = metrics.epoch_val_iou.empty() ? val_iou(std::nullopt) : metrics.epoch_val_iou.back();
  } else if (stage == 2) {
    std::vector<std::string> trained{"channel_encoder", "channel_decoder"};
    const bool finetune = config.train.finetune_all;
    if (finetune) {
      trained.insert(trained.end(), {"encoder", "compressor", "seg_decoder"});
      freeze(nets, {"denoiser"});
    } else {
      freeze(nets, {"encoder", "compressor", "seg_decoder", "denoiser"});
    }
    torch::Tensor cached;
    if (!finetune) cached = cache_features(nets, frames);
    torch::optim::Adam opt(parameters_of(nets, trained), torch::optim::AdamOptions(config.train.lr));
    for (int epoch = 0; epoch < config.train.epochs_stage2; ++epoch) {
      set_epoch_lr(opt, config.train.lr, epoch, config.train.epochs_stage2);
      set_mode(nets, trained, true);
      double total = 0.0;
      const auto order = permutation(n, gen);
      for (std::int64_t i = 0; i < n; i += batch) {
        std::vector<FrameRef> refs;
        std::vector<std::int64_t> idx;
        for (std::int64_t j = i; j < std::min(n, i + batch); ++j) {
          idx.push_back(order[j]);
          refs.push_back(frames[static_cast<std::size_t>(order[j])]);
        }
        const auto gt = stack_ground_truth(refs).unsqueeze(1);
        const SnrDb snr{uniform(gen, config.channel.snr_min_db, config.channel.snr_max_db)};
        opt.zero_grad();
        auto fused = finetune ? fuse_batch(nets, collate(refs)) : cached.index_select(0, torch::tensor(idx));
        auto received = analog_link(nets, fused, snr, gen);
        auto loss = bce(server_logits(nets, received), gt, config.train.pos_weight);
        if (config.train.recon_weight > 0.0) {
          auto target = fused.detach();
          loss = loss + config.train.recon_weight * (received - target).square().mean() /
                            target.square().mean().clamp_min(1e-8);
        }
        loss.backward();
        opt.step();
        total += loss.item<double>() * static_cast<double>(refs.size());
      }
      metrics.epoch_loss.push_back(total / static_cast<double>(n));
      metrics.epoch_val_iou.push_back(val_iou(config.channel.snr_db));
      log(format_epoch(2, epoch, config.train.epochs_stage2, metrics.epoch_loss.back(), metrics.epoch_val_iou.back()));
    }
    if (!val_seqs.empty()) record_link_metrics(nets, val_seqs, val_seed, metrics);
  } else {
    freeze(nets, {"encoder", "channel_encoder", "channel_decoder", "compressor", "seg_decoder"});
    const auto cached = cache_features(nets, frames);
    struct Pair {
      std::int64_t frame;
      int horizon;
    };
    std::vector<Pair> pairs;
    for (std::int64_t f = 0; f < n; ++f) {
      const auto& ref = frames[static_cast<std::size_t>(f)];
      for (int h : config.diffusion.horizons)
        if (ref.frame + h < static_cast<int>(ref.sequence->frames.size())) pairs.push_back({f, h});
    }
    const auto np = static_cast<std::int64_t>(pairs.size());
    torch::optim::Adam opt(parameters_of(nets, {"denoiser"}), torch::optim::AdamOptions(config.train.lr));
    for (int epoch = 0; epoch < config.train.epochs_stage3; ++epoch) {
      set_epoch_lr(opt, config.train.lr, epoch, config.train.epochs_stage3);
      double total = 0.0;
      const auto order = permutation(np, gen);
      for (std::int64_t i = 0; i < np; i += batch) {
        std::vector<std::int64_t> idx;
        std::vector<FrameRef> targets;
        std::vector<std::int64_t> horizons;
        for (std::int64_t j = i; j < std::min(np, i + batch); ++j) {
          const auto& p = pairs[static_cast<std::size_t>(order[j])];
          idx.push_back(p.frame);
          targets.push_back(frames[static_cast<std::size_t>(p.frame)]);
          horizons.push_back(p.horizon);
        }
        std::vector<torch::Tensor> x0;
        for (std::size_t j = 0; j < targets.size(); ++j)
          x0.push_back(targets[j].sequence->frames[static_cast<std::size_t>(targets[j].frame + horizons[j])].gt);
        const SnrDb snr{uniform(gen, config.channel.snr_min_db, config.channel.snr_max_db)};
        torch::Tensor condition;
        {
          torch::NoGradGuard no_grad;
          auto fused = cached.index_select(0, torch::tensor(idx));
          condition = torch::sigmoid(server_logits(nets, analog_link(nets, fused, snr, gen)));
        }
        auto target = torch::stack(x0).unsqueeze(1);
        augment_pairs(condition, target, gen);
        nets.denoiser->train();
        opt.zero_grad();
        auto loss = diffusion_loss(nets.denoiser, to_signed(target), to_signed(condition),
                                   torch::tensor(horizons), nets.schedule(), gen);
        loss.backward();
        opt.step();
        total += loss.item<double>() * static_cast<double>(idx.size());
      }
      metrics.epoch_loss.push_back(total / static_cast<double>(np));
      log(format_epoch(3, epoch, config.train.epochs_stage3, metrics.epoch_loss.back(), -1.0));
    }
    // Sampling is expensive, so refined validation IoU is measured once, after the last epoch.
    if (!val_seqs.empty()) {
      metrics.epoch_val_iou.push_back(
          evaluate_networks(nets, val_seqs, EvalRequest{config.channel.snr_db, true, 0, val_seed}).overall.mean);
      log("stage 3 refined val_iou " + std::to_string(metrics.epoch_val_iou.back()));
    }
  }

  nets.set_training(false);
  std::vector<StageMetrics> history = prev ? prev->metrics : std::vector<StageMetrics>{};
  history.push_back(std::move(metrics));
  return capture_checkpoint(nets, stage, seed, std::move(history));
}

}  // namespace bevlink
