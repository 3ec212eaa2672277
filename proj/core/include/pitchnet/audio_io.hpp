#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace pitchnet {

inline constexpr int kCanonicalSampleRate = 44100;

/// Mono audio. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = kCanonicalSampleRate;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Reads a RIFF/WAVE file holding PCM-16, PCM-24, PCM-32 or IEEE float-32
/// samples (plain or WAVE_FORMAT_EXTENSIBLE). Channels are averaged to mono.
/// Integer samples are divided by the type's maximum positive value.
/// Throws FormatError (with byte offset) on malformed or unsupported input.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes a 16-bit PCM mono file. Samples are clamped to [-1, 1] and scaled
/// by 2^15 - 1.
void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path);

/// Band-limited (Kaiser-windowed sinc) sample-rate conversion. The output has
/// round(n * target_rate / sample_rate) samples.
AudioBuffer resample(const AudioBuffer& buffer, int target_rate);

/// Windowed-sinc interpolation of `samples` onto `out_len` evenly spaced
/// points spanning the same time range (output step = in_len / out_len input
/// samples). Used both for rate conversion and for naive time stretching,
/// where the pitch scales by in_len / out_len.
std::vector<float> stretch_to_length(std::span<const float> samples,
                                     std::size_t out_len);

/// resample(buffer, 44100); returns the input unchanged when already there.
AudioBuffer resample_to_44100(const AudioBuffer& buffer);

/// Throws InvalidArgument unless sample_rate > 0 and all samples are finite.
void validate(const AudioBuffer& buffer);

} // namespace pitchnet
