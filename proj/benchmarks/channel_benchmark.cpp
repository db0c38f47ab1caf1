#include <benchmark/benchmark.h>

#include "bevlink/channel.hpp"

namespace {

void awgn_benchmark(benchmark::State& state) {
  torch::manual_seed(1);
  const auto symbols = bevlink::power_normalize(torch::randn({state.range(0)}));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevlink::awgn(symbols, bevlink::SnrDb{10.0}, seed++).values);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(awgn_benchmark)->Arg(1 << 14)->Arg(48 * 64 * 64 / 4);

void power_normalize_benchmark(benchmark::State& state) {
  torch::manual_seed(2);
  const auto x = torch::randn({12, 64, 64});
  for (auto _ : state) {
    benchmark::DoNotOptimize(bevlink::power_normalize(x).values);
  }
}
BENCHMARK(power_normalize_benchmark);

}  // namespace
