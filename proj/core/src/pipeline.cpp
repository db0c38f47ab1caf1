#include "bevlink/pipeline.hpp"

#include <map>

#include "bevlink/digital.hpp"
#include "bevlink/errors.hpp"

namespace bevlink {

std::string to_string(Side side) { return side == Side::vehicle ? "vehicle" : "server"; }

Side parse_side(const std::string& name) {
  if (name == "vehicle") return Side::vehicle;
  if (name == "server") return Side::server;
  throw ValidationError("unknown side '" + name + "'");
}

Side side_of(const std::string& tensor_name) {
  const auto prefix = tensor_name.substr(0, tensor_name.find('.'));
  if (prefix == "encoder" || prefix == "channel_encoder") return Side::vehicle;
  return Side::server;
}

namespace {

int symbol_channels(const ExperimentConfig& config, int fused) {
  return static_cast<int>(std::lround(fused * config.channel.ratio));
}

}  // namespace

Networks::Networks(const ExperimentConfig& config, std::uint64_t seed)
    : config_(config), schedule_(DiffusionSchedule::from_settings(config.diffusion)) {
  if (config.channel.kind == "rayleigh") throw UnimplementedError("channel.kind = rayleigh is not implemented");
  if (config.diffusion.placement != "refinement")
    throw UnimplementedError("diffusion.placement = " + config.diffusion.placement + " is not implemented");
  torch::manual_seed(seed);
  encoder = SemanticEncoder(config.encoder);
  const int fused = encoder->out_channels();
  const int symbols = symbol_channels(config, fused);
  if (symbols < 1) throw ConfigError("channel.ratio", "yields no channel symbols");
  channel_encoder = ChannelEncoder(fused, config.channel.hidden_channels, symbols);
  channel_decoder = ChannelDecoder(symbols, config.channel.hidden_channels, fused);
  compressor = BevCompressor(fused, config.channel.compressed_channels);
  seg_decoder = SegmentationDecoder(config.channel.compressed_channels);
  denoiser = Denoiser(config.diffusion.base_channels);
}

const std::vector<std::string>& Networks::module_names() {
  static const std::vector<std::string> names{"encoder",    "channel_encoder", "channel_decoder",
                                              "compressor", "seg_decoder",     "denoiser"};
  return names;
}

std::vector<torch::nn::Module*> Networks::modules() {
  return {encoder.get(), channel_encoder.get(), channel_decoder.get(), compressor.get(), seg_decoder.get(),
          denoiser.get()};
}

torch::nn::Module& Networks::module(const std::string& prefix) {
  const auto& names = module_names();
  const auto mods = modules();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == prefix) return *mods[i];
  throw ValidationError("unknown module '" + prefix + "'");
}

std::vector<NamedTensor> Networks::state() const {
  std::vector<NamedTensor> out;
  auto self = const_cast<Networks*>(this);
  const auto mods = self->modules();
  const auto& names = module_names();
  for (std::size_t i = 0; i < mods.size(); ++i) {
    for (const auto& p : mods[i]->named_parameters(true)) out.push_back({names[i] + "." + p.key(), p.value()});
    for (const auto& b : mods[i]->named_buffers(true)) out.push_back({names[i] + "." + b.key(), b.value()});
  }
  return out;
}

std::vector<std::string> Networks::load_state(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, torch::Tensor> own;
  for (auto& entry : state()) own.emplace(entry.name, entry.tensor);
  std::vector<std::string> touched;
  torch::NoGradGuard no_grad;
  for (const auto& entry : tensors) {
    auto it = own.find(entry.name);
    if (it == own.end()) throw ShapeError("checkpoint tensor '" + entry.name + "' has no counterpart in the networks");
    if (!it->second.sizes().equals(entry.tensor.sizes()))
      throw ShapeError("checkpoint tensor '" + entry.name + "' has a mismatched shape");
    it->second.copy_(entry.tensor);
    const auto prefix = entry.name.substr(0, entry.name.find('.'));
    if (std::find(touched.begin(), touched.end(), prefix) == touched.end()) touched.push_back(prefix);
  }
  return touched;
}

void Networks::set_training(bool training) {
  for (auto* m : modules()) m->train(training);
}

PreparedSequence prepare_sequence(const SceneSequence& sequence) {
  sequence.validate();
  PreparedSequence out;
  out.scene_id = sequence.scene_id;
  out.style = sequence.style;
  out.grid = sequence.grid;
  out.delta_t_s = sequence.delta_t_s;
  const auto& first = sequence.frames.front().camera_views.front();
  const int stride = ImageBackboneImpl::stride;
  out.projection = make_bev_projection(sequence.rig, sequence.grid, first.height / stride, first.width / stride, stride);
  for (const auto& frame : sequence.frames) {
    PreparedFrame pf;
    pf.images = (images_to_tensor(frame.camera_views) * 255.0).round().to(torch::kUInt8);
    pf.pillars = scatter_radar_pillars(frame.radar_points, sequence.grid).pillars;
    pf.gt = SegmentationMask::from_occupancy(frame.gt_mask, sequence.grid).values;
    pf.vehicles = frame.vehicle_states;
    out.frames.push_back(std::move(pf));
  }
  return out;
}

std::vector<PreparedSequence> prepare_sequences(const Dataset& dataset) {
  std::vector<PreparedSequence> out;
  out.reserve(dataset.sequences.size());
  for (const auto& seq : dataset.sequences) out.push_back(prepare_sequence(seq));
  return out;
}

FrameBatch collate(const std::vector<FrameRef>& frames) {
  if (frames.empty()) throw ShapeError("cannot collate an empty batch");
  std::vector<torch::Tensor> images, pillars, grids, valid, gt;
  for (const auto& ref : frames) {
    const auto& f = ref.sequence->frames.at(static_cast<std::size_t>(ref.frame));
    images.push_back(f.images.to(torch::kFloat32) / 255.0);
    pillars.push_back(f.pillars);
    grids.push_back(ref.sequence->projection.sample_grid);
    valid.push_back(ref.sequence->projection.valid);
    gt.push_back(f.gt.unsqueeze(0));
  }
  return FrameBatch{torch::stack(images), torch::stack(pillars), torch::stack(grids), torch::stack(valid),
                    torch::stack(gt)};
}

torch::Tensor stack_ground_truth(const std::vector<FrameRef>& frames, int horizon) {
  std::vector<torch::Tensor> gt;
  for (const auto& ref : frames) gt.push_back(ref.sequence->frames.at(static_cast<std::size_t>(ref.frame + horizon)).gt);
  return torch::stack(gt);
}

torch::Tensor fuse_batch(Networks& nets, const FrameBatch& batch) {
  return nets.encoder->forward(batch.images, batch.pillars, batch.sample_grid, batch.valid);
}

torch::Tensor server_logits(Networks& nets, const torch::Tensor& features) {
  return nets.seg_decoder->forward(nets.compressor->forward(features));
}

torch::Tensor analog_link(Networks& nets, const torch::Tensor& features, SnrDb snr, torch::Generator& gen) {
  auto tx = normalize_power_batch(nets.channel_encoder->forward(features));
  return nets.channel_decoder->forward(add_awgn(tx, snr, gen));
}

torch::Tensor analog_link(Networks& nets, const torch::Tensor& features, SnrDb snr,
                          const std::vector<std::uint64_t>& seeds) {
  if (static_cast<std::int64_t>(seeds.size()) != features.size(0)) throw ShapeError("one noise seed per sample");
  auto tx = normalize_power_batch(nets.channel_encoder->forward(features));
  std::vector<torch::Tensor> rx;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto gen = make_generator(seeds[i]);
    rx.push_back(add_awgn(tx[static_cast<std::int64_t>(i)], snr, gen));
  }
  return nets.channel_decoder->forward(torch::stack(rx));
}

Variant parse_variant(const std::string& name) {
  if (name == "lossless") return Variant::lossless;
  if (name == "awgn") return Variant::awgn;
  if (name == "awgn+diffusion") return Variant::awgn_diffusion;
  if (name == "digital") return Variant::digital;
  throw ValidationError("unknown variant '" + name + "'");
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::lossless:
      return "lossless";
    case Variant::awgn:
      return "awgn";
    case Variant::awgn_diffusion:
      return "awgn+diffusion";
    case Variant::digital:
      return "digital";
  }
  return "unknown";
}

DecodedMasks decode_masks(Networks& nets, const FrameBatch& batch, Variant variant, SnrDb snr, int horizon,
                          const std::vector<std::uint64_t>& noise_seeds,
                          const std::vector<std::uint64_t>& sample_seeds) {
  validate_horizon(horizon);
  const auto b = batch.images.size(0);
  if (static_cast<std::int64_t>(noise_seeds.size()) != b) throw ShapeError("one noise seed per frame");
  torch::NoGradGuard no_grad;
  // Sweeps share one Networks across threads; only flip modes when actually needed.
  if (nets.encoder->is_training() || nets.denoiser->is_training()) nets.set_training(false);
  DecodedMasks out;
  out.outage.assign(static_cast<std::size_t>(b), 0);
  auto fused = fuse_batch(nets, batch);
  switch (variant) {
    case Variant::lossless:
      out.probs = torch::sigmoid(server_logits(nets, fused)).squeeze(1);
      break;
    case Variant::awgn:
    case Variant::awgn_diffusion:
      out.probs = torch::sigmoid(server_logits(nets, analog_link(nets, fused, snr, noise_seeds))).squeeze(1);
      if (variant == Variant::awgn_diffusion) {
        if (static_cast<std::int64_t>(sample_seeds.size()) != b) throw ShapeError("one sampler seed per frame");
        out.probs = sample_masks(nets.denoiser, out.probs, std::vector<int>(static_cast<std::size_t>(b), horizon),
                                 nets.schedule(), sample_seeds);
      }
      break;
    case Variant::digital: {
      std::vector<torch::Tensor> received;
      for (std::int64_t i = 0; i < b; ++i) {
        auto rx = digital_transmit(fused[i], snr, noise_seeds[static_cast<std::size_t>(i)]);
        if (rx) {
          received.push_back(*rx);
        } else {
          out.outage[static_cast<std::size_t>(i)] = 1;
          received.push_back(torch::zeros_like(fused[i]));
        }
      }
      out.probs = torch::sigmoid(server_logits(nets, torch::stack(received))).squeeze(1);
      for (std::int64_t i = 0; i < b; ++i)
        if (out.outage[static_cast<std::size_t>(i)]) out.probs[i].zero_();
      break;
    }
  }
  return out;
}

}  // namespace bevlink
