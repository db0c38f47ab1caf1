#include <benchmark/benchmark.h>

#include "bevlink/channel.hpp"
#include "bevlink/diffusion.hpp"

namespace {

void denoiser_step_benchmark(benchmark::State& state) {
  torch::manual_seed(4);
  torch::NoGradGuard no_grad;
  bevlink::Denoiser net(static_cast<int>(state.range(0)));
  net->eval();
  const auto batch = state.range(1);
  auto x = torch::randn({batch, 1, 64, 64});
  auto cond = torch::rand({batch, 1, 64, 64});
  auto t = torch::full({batch}, 50, torch::kInt64);
  auto h = torch::zeros({batch}, torch::kInt64);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net->forward(x, cond, t, h));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(denoiser_step_benchmark)->Args({16, 1})->Args({16, 8})->Args({32, 8})->Unit(benchmark::kMillisecond);

void denoiser_train_step_benchmark(benchmark::State& state) {
  torch::manual_seed(5);
  bevlink::Denoiser net(static_cast<int>(state.range(0)));
  const auto schedule = bevlink::DiffusionSchedule::linear(100);
  auto gen = bevlink::make_generator(6);
  auto x0 = torch::rand({8, 1, 64, 64}).round() * 2 - 1;
  auto cond = torch::rand({8, 1, 64, 64}) * 2 - 1;
  auto h = torch::zeros({8}, torch::kInt64);
  for (auto _ : state) {
    net->zero_grad();
    bevlink::diffusion_loss(net, x0, cond, h, schedule, gen).backward();
  }
}
BENCHMARK(denoiser_train_step_benchmark)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
