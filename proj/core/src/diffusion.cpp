#include "bevlink/diffusion.hpp"

#include <cmath>

#include "bevlink/channel.hpp"
#include "bevlink/errors.hpp"

namespace bevlink {

namespace nn = torch::nn;

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw ValidationError("diffusion needs at least one step");
  DiffusionSchedule s;
  s.steps = steps;
  const double scale = 1000.0 / steps;
  double abar = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    const double beta = scale * (beta_min + frac * (beta_max - beta_min));
    abar *= 1.0 - beta;
    s.betas.push_back(beta);
    s.alphas_bar.push_back(abar);
  }
  s.validate();
  return s;
}

DiffusionSchedule DiffusionSchedule::from_settings(const DiffusionSettings& settings) {
  return linear(settings.steps, settings.beta_min, settings.beta_max);
}

void DiffusionSchedule::validate() const {
  if (steps < 1 || betas.size() != static_cast<std::size_t>(steps) || alphas_bar.size() != betas.size())
    throw ValidationError("diffusion schedule is inconsistent");
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!(betas[i] > 0.0 && betas[i] < 1.0)) throw ValidationError("diffusion betas must lie in (0, 1)");
    if (i > 0 && !(betas[i] > betas[i - 1])) throw ValidationError("diffusion betas must be strictly increasing");
  }
  if (!(alphas_bar.back() < 0.05)) throw ValidationError("terminal alpha_bar must be below 0.05");
}

void validate_horizon(int horizon) {
  if (horizon < 0 || horizon > kMaxHorizon)
    throw ValidationError("horizon must be in {0, 1, 2, 3}, got " + std::to_string(horizon));
}

torch::Tensor to_signed(const torch::Tensor& probs) { return probs * 2.0 - 1.0; }

torch::Tensor to_probability(const torch::Tensor& x) { return ((x + 1.0) * 0.5).clamp(0.0, 1.0); }

torch::Tensor diffusion_forward(const torch::Tensor& x0, int t, const DiffusionSchedule& schedule, std::uint64_t seed) {
  if (t < 1 || t > schedule.steps)
    throw ValidationError("diffusion timestep must be in [1, " + std::to_string(schedule.steps) + "]");
  auto gen = make_generator(seed);
  auto eps = torch::randn(x0.sizes(), gen, x0.options());
  const double abar = schedule.alpha_bar(t);
  return std::sqrt(abar) * x0 + std::sqrt(1.0 - abar) * eps;
}

torch::Tensor diffusion_forward(const SegmentationMask& mask, int t, const DiffusionSchedule& schedule,
                                std::uint64_t seed) {
  mask.validate();
  return diffusion_forward(to_signed(mask.values), t, schedule, seed);
}

torch::Tensor sinusoidal_embedding(const torch::Tensor& positions, int dim) {
  const int half = dim / 2;
  auto freqs = torch::exp(torch::arange(half, torch::kFloat32) * (-std::log(10000.0) / std::max(half - 1, 1)));
  auto args = positions.to(torch::kFloat32).unsqueeze(1) * freqs.unsqueeze(0);
  return torch::cat({torch::sin(args), torch::cos(args)}, 1);
}

namespace {

nn::GroupNorm group_norm(int channels) { return nn::GroupNorm(nn::GroupNormOptions(std::min(8, channels), channels)); }

nn::Conv2d conv3(int in, int out, int stride = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1));
}

class TimeResBlockImpl : public nn::Module {
 public:
  TimeResBlockImpl(int in, int out, int emb_dim) {
    norm1_ = register_module("norm1", group_norm(in));
    conv1_ = register_module("conv1", conv3(in, out));
    emb_ = register_module("emb", nn::Linear(emb_dim, out));
    norm2_ = register_module("norm2", group_norm(out));
    conv2_ = register_module("conv2", conv3(out, out));
    if (in != out) skip_ = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in, out, 1)));
  }

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& emb) {
    auto h = conv1_(torch::silu(norm1_(x)));
    h = h + emb_(emb).unsqueeze(-1).unsqueeze(-1);
    h = conv2_(torch::silu(norm2_(h)));
    return h + (skip_ ? skip_(x) : x);
  }

 private:
  nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
  nn::Linear emb_{nullptr};
};
TORCH_MODULE(TimeResBlock);

}  // namespace

struct DenoiserImpl::Impl {
  nn::Sequential time_mlp{nullptr}, horizon_mlp{nullptr};
  nn::Conv2d in_conv{nullptr}, down1{nullptr}, down2{nullptr}, out_conv{nullptr};
  TimeResBlock enc0{nullptr}, enc1{nullptr}, enc2{nullptr}, mid{nullptr}, dec1{nullptr}, dec0{nullptr};
  nn::GroupNorm out_norm{nullptr};
};

DenoiserImpl::DenoiserImpl(int base_channels) : impl_(std::make_shared<Impl>()), base_(base_channels) {
  const int c = base_channels;
  const int emb = 4 * c;
  auto& m = *impl_;
  m.time_mlp = register_module("time_mlp", nn::Sequential(nn::Linear(c, emb), nn::SiLU(), nn::Linear(emb, emb)));
  m.horizon_mlp = register_module("horizon_mlp", nn::Sequential(nn::Linear(c, emb), nn::SiLU(), nn::Linear(emb, emb)));
  m.in_conv = register_module("in_conv", conv3(2, c));
  m.enc0 = register_module("enc0", TimeResBlock(c, c, emb));
  m.down1 = register_module("down1", conv3(c, c, 2));
  m.enc1 = register_module("enc1", TimeResBlock(c, 2 * c, emb));
  m.down2 = register_module("down2", conv3(2 * c, 2 * c, 2));
  m.enc2 = register_module("enc2", TimeResBlock(2 * c, 4 * c, emb));
  m.mid = register_module("mid", TimeResBlock(4 * c, 4 * c, emb));
  m.dec1 = register_module("dec1", TimeResBlock(4 * c + 2 * c, 2 * c, emb));
  m.dec0 = register_module("dec0", TimeResBlock(2 * c + c, c, emb));
  m.out_norm = register_module("out_norm", group_norm(c));
  m.out_conv = register_module("out_conv", conv3(c, 1));
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& x_t, const torch::Tensor& condition, const torch::Tensor& t,
                                    const torch::Tensor& horizon) {
  if (x_t.dim() != 4 || x_t.size(1) != 1 || !x_t.sizes().equals(condition.sizes()))
    throw ShapeError("denoiser expects matching [B, 1, G, G] sample and condition");
  if (x_t.size(2) % 4 != 0 || x_t.size(3) % 4 != 0) throw ShapeError("denoiser grid must be a multiple of 4");
  auto& m = *impl_;
  // Horizon positions are spread out so the four prompts are well separated in embedding space.
  auto emb = m.time_mlp->forward(sinusoidal_embedding(t, base_)) +
             m.horizon_mlp->forward(sinusoidal_embedding(horizon * 25, base_));
  auto h0 = m.enc0(m.in_conv(torch::cat({x_t, condition}, 1)), emb);
  auto h1 = m.enc1(m.down1(h0), emb);
  auto h2 = m.mid(m.enc2(m.down2(h1), emb), emb);
  namespace F = torch::nn::functional;
  auto up = [](const torch::Tensor& x) {
    return F::interpolate(x, F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest));
  };
  auto d1 = m.dec1(torch::cat({up(h2), h1}, 1), emb);
  auto d0 = m.dec0(torch::cat({up(d1), h0}, 1), emb);
  return m.out_conv(torch::silu(m.out_norm(d0)));
}

torch::Tensor diffusion_loss(Denoiser& denoiser, const torch::Tensor& x0, const torch::Tensor& condition,
                             const torch::Tensor& horizon, const DiffusionSchedule& schedule, torch::Generator& gen) {
  const auto b = x0.size(0);
  auto t = torch::randint(1, schedule.steps + 1, {b}, gen, torch::TensorOptions().dtype(torch::kInt64));
  auto abar_table = torch::tensor(schedule.alphas_bar, torch::kFloat64).to(torch::kFloat32);
  auto abar = abar_table.index_select(0, t - 1).view({b, 1, 1, 1});
  auto eps = torch::randn(x0.sizes(), gen, x0.options());
  auto x_t = abar.sqrt() * x0 + (1.0 - abar).sqrt() * eps;
  return torch::mse_loss(denoiser->forward(x_t, condition, t, horizon), x0);
}

torch::Tensor sample_masks(Denoiser& denoiser, const torch::Tensor& condition, const std::vector<int>& horizons,
                           const DiffusionSchedule& schedule, const std::vector<std::uint64_t>& seeds) {
  if (condition.dim() != 3) throw ShapeError("sample_masks expects [B, G, G] conditions");
  const auto b = condition.size(0);
  if (static_cast<std::int64_t>(horizons.size()) != b || static_cast<std::int64_t>(seeds.size()) != b)
    throw ShapeError("one horizon and one seed are required per condition");
  for (int h : horizons) validate_horizon(h);

  torch::NoGradGuard no_grad;
  const bool was_training = denoiser->is_training();
  if (was_training) denoiser->eval();

  const auto g = condition.size(1);
  std::vector<torch::Generator> gens;
  gens.reserve(seeds.size());
  for (auto s : seeds) gens.push_back(make_generator(s));
  auto draw = [&] {
    std::vector<torch::Tensor> parts;
    for (auto& gen : gens) parts.push_back(torch::randn({1, 1, g, condition.size(2)}, gen));
    return torch::cat(parts, 0);
  };

  auto cond = to_signed(condition.to(torch::kFloat32)).unsqueeze(1);
  auto h = torch::tensor(std::vector<std::int64_t>(horizons.begin(), horizons.end()), torch::kInt64);
  auto x = draw();
  for (int t = schedule.steps; t >= 1; --t) {
    const double beta = schedule.beta(t);
    const double abar = schedule.alpha_bar(t);
    const double abar_prev = schedule.alpha_bar(t - 1);
    auto x0 = denoiser->forward(x, cond, torch::full({b}, t, torch::kInt64), h).clamp(-1.0, 1.0);
    const double c0 = beta * std::sqrt(abar_prev) / (1.0 - abar);
    const double ct = (1.0 - abar_prev) * std::sqrt(1.0 - beta) / (1.0 - abar);
    x = c0 * x0 + ct * x;
    if (t > 1) x = x + std::sqrt(beta * (1.0 - abar_prev) / (1.0 - abar)) * draw();
  }
  if (was_training) denoiser->train();
  return to_probability(x.squeeze(1));
}

SegmentationMask diffusion_refine(Denoiser& denoiser, const SegmentationMask& condition, int horizon,
                                  const DiffusionSchedule& schedule, std::uint64_t seed) {
  condition.validate();
  validate_horizon(horizon);
  auto out = sample_masks(denoiser, condition.values.unsqueeze(0), {horizon}, schedule, {seed});
  return SegmentationMask{out.squeeze(0).contiguous(), condition.grid, condition.threshold};
}

SegmentationMask predict_future(Denoiser& denoiser, const SegmentationMask& condition, int horizon,
                                const DiffusionSchedule& schedule, std::uint64_t seed) {
  validate_horizon(horizon);
  return diffusion_refine(denoiser, condition, horizon, schedule, seed);
}

}  // namespace bevlink
