#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace pitchnet {

inline constexpr std::size_t kNumPitchClasses = 128;
inline constexpr double kMaxMidi = 127.0;

/// Probability mass over MIDI numbers 0..127. All-zero means silence.
using PitchVector = std::array<double, kNumPitchClasses>;

/// Two-point encoding: mass 1 - f at floor(p) and f at floor(p) + 1, where f
/// is the fractional part. 0 encodes silence as the all-zero vector.
/// Throws InvalidArgument for p outside [0, 127] or non-finite p.
PitchVector encode(double midi);

/// Expected MIDI number sum(i * e[i]), or 0 when the total mass is <= 0.5.
double decode(std::span<const double> e);

/// Expectation restricted to indices within `radius` of the argmax,
/// renormalized by the mass in that window. 0 when the total mass < 1e-6.
double decode_local(std::span<const double> e, int radius = 4);

/// 12-TET with A4 = MIDI 69 = 440 Hz.
double midi_to_hz(double midi);

/// Inverse of midi_to_hz. Throws InvalidArgument for hz <= 0.
double hz_to_midi(double hz);

} // namespace pitchnet
