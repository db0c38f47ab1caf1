#include <benchmark/benchmark.h>

#include "bevlink/encoder.hpp"
#include "bevlink/scene.hpp"

namespace {

void rasterize_benchmark(benchmark::State& state) {
  const auto grid = bevlink::BevGridSpec::centered(32.0, 64);
  const auto seq = bevlink::generate_sequence(11, bevlink::SceneParams::preset(bevlink::SceneStyle::A), grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevlink::rasterize(seq.frames.front().vehicle_states, grid));
  }
}
BENCHMARK(rasterize_benchmark);

void scatter_pillars_benchmark(benchmark::State& state) {
  const auto grid = bevlink::BevGridSpec::centered(32.0, 64);
  const auto seq = bevlink::generate_sequence(12, bevlink::SceneParams::preset(bevlink::SceneStyle::A), grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevlink::scatter_radar_pillars(seq.frames.front().radar_points, grid).pillars);
  }
}
BENCHMARK(scatter_pillars_benchmark);

void generate_sequence_benchmark(benchmark::State& state) {
  const auto grid = bevlink::BevGridSpec::centered(32.0, 64);
  auto params = bevlink::SceneParams::preset(bevlink::SceneStyle::B);
  params.num_frames = 4;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevlink::generate_sequence(seed++, params, grid));
  }
}
BENCHMARK(generate_sequence_benchmark)->Unit(benchmark::kMillisecond);

}  // namespace
