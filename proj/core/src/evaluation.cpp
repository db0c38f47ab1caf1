#include "bevlink/evaluation.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <thread>

#include "bevlink/errors.hpp"
#include "bevlink/rng.hpp"

namespace bevlink {

namespace {

constexpr int kChunk = 8;

std::vector<std::uint8_t> to_gray(const torch::Tensor& probs) {
  auto u8 = (probs.clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
  const auto* p = u8.data_ptr<std::uint8_t>();
  return {p, p + u8.numel()};
}

}  // namespace

double iou_binary(const torch::Tensor& pred, const torch::Tensor& gt) {
  if (!pred.sizes().equals(gt.sizes())) throw ShapeError("IoU masks must have equal shapes");
  const auto inter = (pred & gt).sum().item<std::int64_t>();
  const auto uni = (pred | gt).sum().item<std::int64_t>();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double iou(const SegmentationMask& pred, const SegmentationMask& gt, double threshold) {
  pred.validate();
  gt.validate();
  if (!(pred.grid == gt.grid)) throw ShapeError("IoU masks live on different grids");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("IoU threshold must lie in (0, 1)");
  return iou_binary(pred.values >= threshold, gt.binary());
}

std::vector<double> batch_iou(const torch::Tensor& probs, const torch::Tensor& gt, double threshold) {
  if (!probs.sizes().equals(gt.sizes()) || probs.dim() != 3) throw ShapeError("batch IoU expects matching [B, G, G]");
  auto p = probs >= threshold;
  auto g = gt >= 0.5;
  auto inter = (p & g).flatten(1).sum(1);
  auto uni = (p | g).flatten(1).sum(1);
  std::vector<double> out;
  for (std::int64_t i = 0; i < probs.size(0); ++i) {
    const auto u = uni[i].item<std::int64_t>();
    out.push_back(u == 0 ? 1.0 : static_cast<double>(inter[i].item<std::int64_t>()) / static_cast<double>(u));
  }
  return out;
}

MeanVariance mean_variance(const std::vector<double>& values) {
  MeanVariance mv;
  mv.count = values.size();
  if (values.empty()) return mv;
  double sum = 0.0;
  for (double v : values) sum += v;
  mv.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - mv.mean) * (v - mv.mean);
    mv.variance = ss / static_cast<double>(values.size() - 1);
  }
  return mv;
}

std::uint64_t frame_noise_seed(std::uint64_t seed, const std::string& scene_id, int frame, double snr_db) {
  return derive_seed(seed, {fnv1a(scene_id), static_cast<std::uint64_t>(frame), std::bit_cast<std::uint64_t>(snr_db)});
}

DecodedMasks decode_sequence(Networks& nets, const PreparedSequence& sequence, int count, Variant variant, SnrDb snr,
                             int horizon, std::uint64_t seed) {
  if (count < 1 || count > static_cast<int>(sequence.frames.size())) throw ShapeError("frame count out of range");
  DecodedMasks all;
  std::vector<torch::Tensor> parts;
  for (int start = 0; start < count; start += kChunk) {
    const int end = std::min(count, start + kChunk);
    std::vector<FrameRef> refs;
    std::vector<std::uint64_t> noise, sampler;
    for (int t = start; t < end; ++t) {
      refs.push_back({&sequence, t});
      noise.push_back(frame_noise_seed(seed, sequence.scene_id, t, snr.value));
      sampler.push_back(derive_seed(noise.back(), {static_cast<std::uint64_t>(horizon) + 1}));
    }
    auto masks = decode_masks(nets, collate(refs), variant, snr, horizon, noise, sampler);
    parts.push_back(masks.probs);
    all.outage.insert(all.outage.end(), masks.outage.begin(), masks.outage.end());
  }
  all.probs = torch::cat(parts, 0);
  return all;
}

CheckpointEvaluation evaluate_networks(Networks& nets, const std::vector<PreparedSequence>& sequences,
                                       const EvalRequest& request) {
  if (sequences.empty()) throw ValidationError("evaluation needs at least one sequence");
  validate_horizon(request.horizon);
  Variant variant = Variant::lossless;
  if (request.snr_db) variant = request.use_diffusion ? Variant::awgn_diffusion : Variant::awgn;
  CheckpointEvaluation out;
  std::vector<double> all;
  for (const auto& seq : sequences) {
    const int count = static_cast<int>(seq.frames.size()) - request.horizon;
    if (count < 1) continue;
    auto masks = decode_sequence(nets, seq, count, variant, SnrDb{request.snr_db.value_or(0.0)}, request.horizon,
                                 request.seed);
    if (variant == Variant::lossless && request.use_diffusion) {
      std::vector<std::uint64_t> seeds;
      for (int t = 0; t < count; ++t)
        seeds.push_back(derive_seed(frame_noise_seed(request.seed, seq.scene_id, t, 0.0), {std::uint64_t{99}}));
      masks.probs = sample_masks(nets.denoiser, masks.probs,
                                 std::vector<int>(static_cast<std::size_t>(count), request.horizon), nets.schedule(),
                                 seeds);
    }
    std::vector<FrameRef> refs;
    for (int t = 0; t < count; ++t) refs.push_back({&seq, t});
    const auto scores = batch_iou(masks.probs, stack_ground_truth(refs, request.horizon), request.threshold);
    out.per_scene.emplace_back(seq.scene_id, mean_variance(scores));
    all.insert(all.end(), scores.begin(), scores.end());
  }
  out.overall = mean_variance(all);
  return out;
}

CheckpointEvaluation evaluate_checkpoint(const Checkpoint& ckpt, const Dataset& dataset, const EvalRequest& request) {
  if (request.use_diffusion && ckpt.stage < 3)
    throw PrerequisiteError("diffusion evaluation requires a stage-3 checkpoint");
  if (request.snr_db && ckpt.stage < 2) throw PrerequisiteError("channel evaluation requires a stage-2 checkpoint");
  auto nets = restore_networks(ckpt);
  return evaluate_networks(nets, prepare_sequences(dataset), request);
}

SweepResult snr_sweep(Networks& nets, const std::vector<PreparedSequence>& sequences, const SweepOptions& options) {
  if (options.snr_list.empty()) throw ValidationError("SNR list is empty");
  if (sequences.empty()) throw ValidationError("sweep dataset has no sequences");
  if (options.variants.empty() || options.seeds < 1 || options.horizons.empty())
    throw ValidationError("sweep needs at least one variant, seed and horizon");
  std::vector<Variant> variants;
  for (const auto& v : options.variants) variants.push_back(parse_variant(v));
  for (int h : options.horizons) validate_horizon(h);

  const std::size_t ns = sequences.size(), nsnr = options.snr_list.size(), nv = variants.size(),
                    nseed = static_cast<std::size_t>(options.seeds), nh = options.horizons.size();
  std::vector<SweepRecord> records(ns * nsnr * nv * nseed * nh);
  auto slot = [&](std::size_t s, std::size_t q, std::size_t v, std::size_t k, std::size_t h) -> SweepRecord& {
    return records[(((s * nsnr + q) * nv + v) * nseed + k) * nh + h];
  };
  std::vector<std::vector<ScenePanel>> panels(ns);

  // Per-frame IoU of a decoded sequence against ground truth shifted by h.
  auto score = [&](const PreparedSequence& seq, const torch::Tensor& probs, const std::vector<std::uint8_t>& outage,
                   int h, SweepRecord& rec) {
    const int count = static_cast<int>(seq.frames.size()) - h;
    std::vector<FrameRef> refs;
    for (int t = 0; t < count; ++t) refs.push_back({&seq, t});
    auto ious = batch_iou(probs.slice(0, 0, count), stack_ground_truth(refs, h), options.threshold);
    int lost = 0;
    for (int t = 0; t < count; ++t)
      if (!outage.empty() && outage[static_cast<std::size_t>(t)]) {
        ious[static_cast<std::size_t>(t)] = 0.0;
        ++lost;
      }
    rec.iou = mean_variance(ious).mean;
    rec.frames = count;
    rec.outage = lost;
  };

  const int max_h = *std::max_element(options.horizons.begin(), options.horizons.end());
  for (const auto& seq : sequences)
    if (static_cast<int>(seq.frames.size()) <= max_h) throw ValidationError("sequence too short for the horizons");

  // One task per (scene, seed, snr); lossless results are computed once per scene and copied.
  std::vector<torch::Tensor> lossless(ns);
  const std::size_t tasks = ns * nseed * nsnr;
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    torch::NoGradGuard no_grad;
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= tasks) return;
      const std::size_t s = task / (nseed * nsnr), k = (task / nsnr) % nseed, q = task % nsnr;
      try {
        const auto& seq = sequences[s];
        const int n = static_cast<int>(seq.frames.size());
        const double snr = options.snr_list[q];
        const std::uint64_t seed = derive_seed(options.base_seed, {static_cast<std::uint64_t>(k)});
        std::optional<DecodedMasks> awgn_masks;
        for (std::size_t v = 0; v < nv; ++v) {
          for (std::size_t hi = 0; hi < nh; ++hi) {
            const int h = options.horizons[hi];
            auto& rec = slot(s, q, v, k, hi);
            rec = SweepRecord{seq.scene_id, snr, to_string(variants[v]), static_cast<int>(k), h, 0.0, 0, 0};
            switch (variants[v]) {
              case Variant::lossless:
                if (k == 0 && q == 0) {
                  lossless[s] = decode_sequence(nets, seq, n, Variant::lossless, SnrDb{snr}, 0, seed).probs;
                }
                break;  // filled after all tasks finish
              case Variant::awgn: {
                if (!awgn_masks) awgn_masks = decode_sequence(nets, seq, n, Variant::awgn, SnrDb{snr}, 0, seed);
                score(seq, awgn_masks->probs, {}, h, rec);
                break;
              }
              case Variant::digital: {
                auto masks = decode_sequence(nets, seq, n, Variant::digital, SnrDb{snr}, 0, seed);
                score(seq, masks.probs, masks.outage, h, rec);
                break;
              }
              case Variant::awgn_diffusion: {
                if (!awgn_masks) awgn_masks = decode_sequence(nets, seq, n, Variant::awgn, SnrDb{snr}, 0, seed);
                const int count = n - h;
                std::vector<std::uint64_t> seeds;
                for (int t = 0; t < count; ++t)
                  seeds.push_back(derive_seed(frame_noise_seed(seed, seq.scene_id, t, snr),
                                              {static_cast<std::uint64_t>(h) + 1}));
                auto refined = sample_masks(nets.denoiser, awgn_masks->probs.slice(0, 0, count),
                                            std::vector<int>(static_cast<std::size_t>(count), h), nets.schedule(),
                                            seeds);
                score(seq, refined, {}, h, rec);
                if (options.collect_panels && k == 0 && q == 0) {
                  ScenePanel panel{seq.scene_id, snr, 0, h, seq.grid.size, to_gray(awgn_masks->probs[0]),
                                   to_gray(refined[0]), to_gray(seq.frames[static_cast<std::size_t>(h)].gt)};
                  std::lock_guard lock(error_mutex);
                  panels[s].push_back(std::move(panel));
                }
                break;
              }
            }
          }
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(tasks);
      }
    }
  };

  if (nets.encoder->is_training() || nets.denoiser->is_training()) nets.set_training(false);
  const int jobs = std::max(1, std::min<int>(options.jobs, static_cast<int>(tasks)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t q = 0; q < nsnr; ++q)
      for (std::size_t v = 0; v < nv; ++v)
        if (variants[v] == Variant::lossless)
          for (std::size_t k = 0; k < nseed; ++k)
            for (std::size_t hi = 0; hi < nh; ++hi) score(sequences[s], lossless[s], {}, options.horizons[hi], slot(s, q, v, k, hi));

  SweepResult result;
  result.records = std::move(records);
  for (auto& p : panels) {
    std::sort(p.begin(), p.end(), [](const ScenePanel& a, const ScenePanel& b) { return a.horizon < b.horizon; });
    result.panels.insert(result.panels.end(), p.begin(), p.end());
  }
  return result;
}

SweepResult snr_sweep(const Checkpoint& ckpt, const Dataset& dataset, const SweepOptions& options) {
  std::vector<Variant> variants;
  for (const auto& v : options.variants) variants.push_back(parse_variant(v));
  for (auto v : variants) {
    if (v == Variant::awgn_diffusion && ckpt.stage < 3)
      throw PrerequisiteError("awgn+diffusion requires a stage-3 checkpoint");
    if ((v == Variant::awgn) && ckpt.stage < 2) throw PrerequisiteError("awgn requires a stage-2 checkpoint");
  }
  auto nets = restore_networks(ckpt);
  auto result = snr_sweep(nets, prepare_sequences(dataset), options);
  result.metadata.checkpoint_id = ckpt.id();
  result.metadata.config_hash = ckpt.config.hash();
  return result;
}

}  // namespace bevlink
