#include "pitchnet/pitch_codec.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "pitchnet/error.hpp"

namespace pitchnet {

PitchVector encode(double midi) {
  if (!std::isfinite(midi) || midi < 0.0 || midi > kMaxMidi) {
    throw InvalidArgument("pitch " + std::to_string(midi) +
                          " outside [0, 127]");
  }
  PitchVector e{};
  if (midi == 0.0) {
    return e;
  }
  const double floor_p = std::floor(midi);
  const auto m = static_cast<std::size_t>(floor_p);
  const double frac = midi - floor_p;
  e[m] = 1.0 - frac;
  if (frac > 0.0 && m + 1 < kNumPitchClasses) {
    e[m + 1] = frac;
  }
  return e;
}

double decode(std::span<const double> e) {
  double mass = 0.0;
  double moment = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    mass += e[i];
    moment += static_cast<double>(i) * e[i];
  }
  return mass > 0.5 ? moment : 0.0;
}

double decode_local(std::span<const double> e, int radius) {
  if (e.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (double v : e) {
    total += v;
  }
  if (total < 1e-6) {
    return 0.0;
  }
  const auto peak = static_cast<int>(
      std::distance(e.begin(), std::max_element(e.begin(), e.end())));
  const int lo = std::max(0, peak - radius);
  const int hi = std::min(static_cast<int>(e.size()) - 1, peak + radius);
  double mass = 0.0;
  double moment = 0.0;
  for (int i = lo; i <= hi; ++i) {
    mass += e[static_cast<std::size_t>(i)];
    moment += i * e[static_cast<std::size_t>(i)];
  }
  return moment / mass;
}

double midi_to_hz(double midi) {
  return 440.0 * std::exp2((midi - 69.0) / 12.0);
}

double hz_to_midi(double hz) {
  if (!(hz > 0.0)) {
    throw InvalidArgument("frequency must be positive");
  }
  return 69.0 + 12.0 * std::log2(hz / 440.0);
}

} // namespace pitchnet
