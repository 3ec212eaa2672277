#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "pitchnet/dsp.hpp"

using namespace pitchnet;

namespace {

AudioBuffer tone(double seconds) {
  AudioBuffer b;
  b.samples.resize(static_cast<std::size_t>(seconds * 44100));
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    b.samples[i] = static_cast<float>(0.5 * std::sin(2.0 * std::numbers::pi * 220.0 * i / 44100.0));
  }
  return b;
}

void BM_Preprocess(benchmark::State& state) {
  const auto b = tone(static_cast<double>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(preprocess(b));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(frame_count(b.samples.size(), {})));
}
BENCHMARK(BM_Preprocess)->Arg(1)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_CorrectedAutocorrelation(benchmark::State& state) {
  const auto hann = hann_window(1024);
  std::vector<double> x(1024);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = std::sin(0.07 * static_cast<double>(i));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(corrected_autocorrelation(x, hann));
  }
}
BENCHMARK(BM_CorrectedAutocorrelation);

} // namespace
