#include <benchmark/benchmark.h>

#include <random>

#include "pitchnet/model.hpp"

using namespace pitchnet;

namespace {

Tensor4 random_tensor(std::size_t n, std::size_t c, std::size_t t, std::size_t f) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor4 x(n, c, t, f);
  for (auto& v : x.data) {
    v = u(gen);
  }
  return x;
}

void BM_Conv3x3Grouped(benchmark::State& state) {
  const auto x = random_tensor(1, 64, 100, 129);
  const auto k = random_tensor(64, 16, 3, 3);
  ConvOptions o;
  o.groups = 4;
  o.padding = {1, 1};
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv2d(x, k, {}, o));
  }
}
BENCHMARK(BM_Conv3x3Grouped)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const auto config = ModelConfig::standard();
  const auto weights = random_weights(config, 1);
  const auto x = random_tensor(1, 4, static_cast<std::size_t>(state.range(0)), 513);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(x, config, weights));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(100)->Unit(benchmark::kMillisecond);

} // namespace
