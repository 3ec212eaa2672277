#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pitchnet/audio_io.hpp"
#include "pitchnet/dsp.hpp"
#include "pitchnet/labeler.hpp"
#include "pitchnet/random.hpp"
#include "pitchnet/track.hpp"

namespace pitchnet {

struct NoteEvent {
  double onset = 0.0;     // seconds
  double duration = 0.0;  // seconds
  double pitch = 0.0;     // MIDI
  double amplitude = 0.0;
};

enum class Waveform { Sine, Triangle, Square, Sawtooth };
inline constexpr int kNumWaveforms = 4;

enum class FilterKind { Butterworth2, OnePole };

enum class Provenance { Synth, Vowel, Segmented };

std::string to_string(Provenance p);
std::string to_string(Waveform w);

struct SynthConfig {
  std::uint64_t seed = 0;
  double total_duration = 7.0;
  double pitch_min = 36.0;
  double pitch_max = 84.0;
  double duration_min = 0.1;
  double duration_max = 1.5;
  double rest_probability = 0.2;
  double amplitude_min = 0.3;
  double amplitude_max = 0.8;
  double filter_probability = 0.3;
  double cutoff_min = 1000.0;
  double cutoff_max = 20000.0;
  FilterKind filter = FilterKind::Butterworth2;
  /// Gaussian noise standard deviation relative to the signal peak.
  double noise_amplitude = 0.1;

  void validate() const;
};

struct DatasetSample {
  AudioBuffer audio;
  PitchTrack labels;
  Provenance provenance = Provenance::Synth;
  std::uint64_t seed = 0;
  std::vector<NoteEvent> score;
  bool filtered = false;
  double cutoff_hz = 0.0;
};

/// Back-to-back notes and rests covering [0, total_duration). Pitch, duration
/// and amplitude are drawn uniformly; each slot is a rest with probability
/// rest_probability. The last slot is cut at total_duration.
std::vector<NoteEvent> sample_score(const SynthConfig& config, Rng& rng);

/// Closed-form (not band-limited) waveform at midi_to_hz(pitch) with a random
/// start phase and 5 ms linear fades at both ends.
AudioBuffer render_note(double pitch, double duration, double amplitude,
                        Waveform waveform, Rng& rng,
                        int sample_rate = kCanonicalSampleRate);

/// In-place low-pass filter.
void lowpass(std::vector<float>& samples, double cutoff_hz, int sample_rate,
             FilterKind kind = FilterKind::Butterworth2);

/// Analytic labels: a frame takes the pitch of the note containing its center
/// sample, 0 elsewhere.
PitchTrack score_labels(std::span<const NoteEvent> score, std::size_t num_samples,
                        const FrameSpec& spec = {});

/// One synthesizer sample, reproducible from config.seed.
DatasetSample synth_sample(const SynthConfig& config);

/// Drops leading and trailing 10 ms frames whose RMS is below 2% of the peak
/// absolute sample.
std::vector<float> trim_silence(std::span<const float> samples, int sample_rate);

/// Notes of a sampled score filled with randomly chosen library recordings,
/// trimmed and resampled to the note length (so their pitch moves by the
/// inverse stretch factor), then auto-labeled.
/// Throws InvalidArgument on an empty library or a recording shorter than
/// 50 ms after trimming.
DatasetSample vowel_sample(std::span<const AudioBuffer> library,
                           const SynthConfig& config,
                           const TrackerConfig& tracker = {});

/// Consecutive `segment_s` chunks, the last one zero-padded, each auto-labeled.
std::vector<DatasetSample> segment_and_label(const AudioBuffer& recording,
                                             double segment_s = 7.0,
                                             const TrackerConfig& tracker = {});

struct ManifestRow {
  std::string name;
  Provenance provenance = Provenance::Synth;
  std::uint64_t seed = 0;
  double duration_s = 0.0;
};

/// Writes `<dir>/<name>.wav` and `<dir>/<name>.csv`; returns the manifest row.
ManifestRow write_sample(const DatasetSample& sample,
                         const std::filesystem::path& dir,
                         const std::string& name);

/// CSV with header `name,provenance,seed,duration_s`.
void write_manifest(std::span<const ManifestRow> rows,
                    const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

double total_duration_s(std::span<const ManifestRow> rows);

} // namespace pitchnet
