#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "pitchnet/audio_io.hpp"

namespace pitchnet {

/// Analysis grid. The canonical grid is 1024-sample windows every 441
/// samples (10 ms at 44.1 kHz), i.e. 583 samples of overlap.
struct FrameSpec {
  std::size_t window_len = 1024;
  std::size_t hop = 441;
  int sample_rate = kCanonicalSampleRate;

  std::size_t bins() const { return window_len / 2 + 1; }
  std::size_t overlap() const { return window_len - hop; }
  double frame_period() const { return static_cast<double>(hop) / sample_rate; }

  /// Throws InvalidArgument unless window_len is a power of two >= 2 and
  /// 0 < hop <= window_len.
  void validate() const;
};

/// Number of frames covering `num_samples`: ceil(num_samples / hop).
std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec);

/// Windows centered on multiples of the hop, zero outside the signal.
struct Frames {
  std::size_t count = 0;
  std::size_t window_len = 0;
  std::vector<double> samples;  // count * window_len, frame-major
  std::vector<double> times;    // seconds, frame centers

  std::span<const double> frame(std::size_t w) const {
    return {samples.data() + w * window_len, window_len};
  }
};

/// Frame w covers samples [w*hop - len/2, w*hop + len/2).
Frames frame_signal(const AudioBuffer& buffer, const FrameSpec& spec);

/// Periodic Hann window: 0.5 * (1 - cos(2*pi*n/len)).
std::vector<double> hann_window(std::size_t len);

struct Spectrum {
  std::vector<double> amplitude;  // |X[k]|, k = 0..len/2
  std::vector<double> phase;      // arg X[k] in [0, 2*pi)
};

/// Non-negative-frequency half of the DFT of `window` (length a power of two).
Spectrum spectrum(std::span<const double> window);

/// Removes the deterministic phase advance of the sliding window:
/// phase[k] - 2*pi*w*hop*k/len (mod 2*pi) for 1 <= k < len/2. The DC and
/// Nyquist bins are only wrapped into [0, 2*pi).
std::vector<double> phase_correct(std::span<const double> phase,
                                  std::size_t frame_index,
                                  const FrameSpec& spec);

/// Autocorrelation of the Hann-windowed frame divided by the autocorrelation
/// of the window, both normalized to 1 at lag 0. Returns lags 0..len/2.
/// Lags where the normalized window autocorrelation falls below 1e-12 are 0;
/// a silent frame yields all zeros.
std::vector<double> corrected_autocorrelation(std::span<const double> raw_window,
                                              std::span<const double> hann);

/// Peak absolute sample value.
double volume(std::span<const double> raw_window);

enum class Channel : std::size_t {
  Amplitude = 0,
  Phase = 1,
  Autocorrelation = 2,
  Volume = 3,
};

inline constexpr std::size_t kNumChannels = 4;

/// T x 4 x bins features in [frame][channel][bin] order.
struct FeatureTensor {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> data;
  std::vector<double> frame_times;

  float at(std::size_t t, Channel c, std::size_t k) const {
    return data[(t * kNumChannels + static_cast<std::size_t>(c)) * bins + k];
  }
  float& at(std::size_t t, Channel c, std::size_t k) {
    return data[(t * kNumChannels + static_cast<std::size_t>(c)) * bins + k];
  }
  std::span<const float> row(std::size_t t, Channel c) const {
    return {data.data() + (t * kNumChannels + static_cast<std::size_t>(c)) * bins,
            bins};
  }
};

/// Amplitude, corrected phase, corrected autocorrelation and volume for every
/// frame. The buffer must be at spec.sample_rate.
FeatureTensor preprocess(const AudioBuffer& buffer, const FrameSpec& spec = {});

/// "PFT1" container: magic, u32 T, u32 4, u32 bins, then float32 data, all
/// little-endian. Frame times are not stored; read_features rebuilds them
/// from `spec`.
void write_features(const FeatureTensor& features,
                    const std::filesystem::path& path);
FeatureTensor read_features(const std::filesystem::path& path,
                            const FrameSpec& spec = {});

} // namespace pitchnet
