#include <benchmark/benchmark.h>

#include "bevlink/digital.hpp"

namespace {

torch::Tensor sample_features() {
  torch::manual_seed(3);
  return torch::relu(torch::randn({48, 64, 64}));
}

void huffman_roundtrip_benchmark(benchmark::State& state) {
  const auto q = bevlink::quantize_uniform(sample_features());
  for (auto _ : state) {
    auto stream = bevlink::huffman_encode(q.codes);
    benchmark::DoNotOptimize(bevlink::huffman_decode(stream));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.codes.size()));
}
BENCHMARK(huffman_roundtrip_benchmark)->Unit(benchmark::kMillisecond);

void digital_transmit_benchmark(benchmark::State& state) {
  const auto x = sample_features();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevlink::digital_transmit(x, bevlink::SnrDb{static_cast<double>(state.range(0))}, seed++));
  }
}
BENCHMARK(digital_transmit_benchmark)->Arg(0)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
