#include <benchmark/benchmark.h>

#include "pitchnet/datagen.hpp"
#include "pitchnet/labeler.hpp"

using namespace pitchnet;

namespace {

void BM_LabelSynthSample(benchmark::State& state) {
  SynthConfig c;
  c.seed = 1;
  const auto features = preprocess(synth_sample(c).audio);
  for (auto _ : state) {
    benchmark::DoNotOptimize(label_features(features));
  }
}
BENCHMARK(BM_LabelSynthSample)->Unit(benchmark::kMillisecond);

void BM_SynthSample(benchmark::State& state) {
  SynthConfig c;
  for (auto _ : state) {
    c.seed++;
    benchmark::DoNotOptimize(synth_sample(c));
  }
}
BENCHMARK(BM_SynthSample)->Unit(benchmark::kMillisecond);

} // namespace
