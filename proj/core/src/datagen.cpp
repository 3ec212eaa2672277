#include "pitchnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pitchnet/error.hpp"
#include "pitchnet/pitch_codec.hpp"

namespace pitchnet {

namespace {

constexpr double kFadeSeconds = 0.005;
constexpr double kTrimFrameSeconds = 0.01;
constexpr double kTrimRelativeRms = 0.02;
constexpr double kMinTrimmedSeconds = 0.05;

std::size_t to_samples(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::llround(seconds * sample_rate));
}

double peak_of(std::span<const float> samples) {
  double peak = 0.0;
  for (float s : samples) {
    peak = std::max(peak, std::abs(static_cast<double>(s)));
  }
  return peak;
}

// Keeps samples inside [-1, 1] after noise or mixing without clipping.
void normalize_if_clipping(std::vector<float>& samples) {
  const double peak = peak_of(samples);
  if (peak > 1.0) {
    const double gain = 1.0 / peak;
    for (float& s : samples) {
      s = static_cast<float>(s * gain);
    }
  }
}

double waveform_value(Waveform w, double phase) {
  switch (w) {
    case Waveform::Sine:
      return std::sin(2.0 * std::numbers::pi * phase);
    case Waveform::Triangle:
      return 4.0 * std::abs(phase - 0.5) - 1.0;
    case Waveform::Square:
      return phase < 0.5 ? 1.0 : -1.0;
    case Waveform::Sawtooth:
      return 2.0 * phase - 1.0;
  }
  return 0.0;
}

Provenance parse_provenance(const std::string& s, std::uint64_t offset) {
  if (s == "synth") return Provenance::Synth;
  if (s == "vowel") return Provenance::Vowel;
  if (s == "segmented") return Provenance::Segmented;
  throw FormatError("unknown provenance '" + s + "'", offset);
}

void place(std::vector<float>& dst, std::size_t start, std::span<const float> src) {
  for (std::size_t i = 0; i < src.size() && start + i < dst.size(); ++i) {
    dst[start + i] += src[i];
  }
}

} // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Synth:
      return "synth";
    case Provenance::Vowel:
      return "vowel";
    case Provenance::Segmented:
      return "segmented";
  }
  return "unknown";
}

std::string to_string(Waveform w) {
  switch (w) {
    case Waveform::Sine:
      return "sine";
    case Waveform::Triangle:
      return "triangle";
    case Waveform::Square:
      return "square";
    case Waveform::Sawtooth:
      return "sawtooth";
  }
  return "unknown";
}

void SynthConfig::validate() const {
  auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!probability(rest_probability) || !probability(filter_probability)) {
    throw InvalidArgument("probabilities must lie in [0, 1]");
  }
  if (!(total_duration >= 0.0)) {
    throw InvalidArgument("total duration must be non-negative");
  }
  if (!(pitch_min > 0.0 && pitch_min <= pitch_max && pitch_max <= kMaxMidi)) {
    throw InvalidArgument("pitch range must satisfy 0 < min <= max <= 127");
  }
  if (!(duration_min > 0.0 && duration_min <= duration_max)) {
    throw InvalidArgument("duration range must satisfy 0 < min <= max");
  }
  if (!(amplitude_min >= 0.0 && amplitude_min <= amplitude_max && amplitude_max <= 1.0)) {
    throw InvalidArgument("amplitude range must satisfy 0 <= min <= max <= 1");
  }
  if (!(cutoff_min > 0.0 && cutoff_min <= cutoff_max)) {
    throw InvalidArgument("cutoff range must satisfy 0 < min <= max");
  }
  if (!(noise_amplitude >= 0.0)) {
    throw InvalidArgument("noise amplitude must be non-negative");
  }
}

std::vector<NoteEvent> sample_score(const SynthConfig& config, Rng& rng) {
  config.validate();
  std::vector<NoteEvent> score;
  double t = 0.0;
  while (config.total_duration - t > 1e-9) {
    const bool rest = rng.bernoulli(config.rest_probability);
    const double pitch = rng.uniform(config.pitch_min, config.pitch_max);
    const double amplitude = rng.uniform(config.amplitude_min, config.amplitude_max);
    const double duration = std::min(
        rng.uniform(config.duration_min, config.duration_max),
        config.total_duration - t);
    if (!rest) {
      score.push_back({t, duration, pitch, amplitude});
    }
    t += duration;
  }
  return score;
}

AudioBuffer render_note(double pitch, double duration, double amplitude,
                        Waveform waveform, Rng& rng, int sample_rate) {
  if (!(pitch > 0.0)) {
    throw InvalidArgument("render_note requires a voiced pitch");
  }
  const double freq = midi_to_hz(pitch);
  const double start_phase = rng.uniform();
  const std::size_t n = to_samples(duration, sample_rate);
  const double fade = std::min(static_cast<double>(to_samples(kFadeSeconds, sample_rate)),
                               static_cast<double>(n) / 2.0);

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double phase = start_phase + freq * static_cast<double>(i) / sample_rate;
    phase -= std::floor(phase);
    double gain = 1.0;
    if (fade > 0.0) {
      const double from_end = static_cast<double>(n - 1 - i);
      gain = std::min({1.0, static_cast<double>(i) / fade, from_end / fade});
    }
    out.samples[i] = static_cast<float>(amplitude * gain * waveform_value(waveform, phase));
  }
  return out;
}

void lowpass(std::vector<float>& samples, double cutoff_hz, int sample_rate,
             FilterKind kind) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0)) {
    throw InvalidArgument("cutoff must lie in (0, sample_rate/2)");
  }
  if (kind == FilterKind::OnePole) {
    const double alpha = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff_hz / sample_rate);
    double y = 0.0;
    for (float& s : samples) {
      y += alpha * (s - y);
      s = static_cast<float>(y);
    }
    return;
  }
  // Second-order Butterworth (RBJ cookbook low-pass, Q = 1/sqrt(2)).
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double cosw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 - cosw) / 2.0 / a0;
  const double b1 = (1.0 - cosw) / a0;
  const double b2 = b0;
  const double a1 = -2.0 * cosw / a0;
  const double a2 = (1.0 - alpha) / a0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (float& s : samples) {
    const double x0 = s;
    const double y0 = b0 * x0 + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x0;
    y2 = y1;
    y1 = y0;
    s = static_cast<float>(y0);
  }
}

PitchTrack score_labels(std::span<const NoteEvent> score, std::size_t num_samples,
                        const FrameSpec& spec) {
  const std::size_t frames = frame_count(num_samples, spec);
  PitchTrack track;
  track.frame_times.resize(frames);
  track.midi.assign(frames, 0.0);
  for (std::size_t w = 0; w < frames; ++w) {
    track.frame_times[w] = static_cast<double>(w * spec.hop) / spec.sample_rate;
  }
  for (const auto& note : score) {
    const std::size_t begin = to_samples(note.onset, spec.sample_rate);
    const std::size_t end = to_samples(note.onset + note.duration, spec.sample_rate);
    for (std::size_t w = (begin + spec.hop - 1) / spec.hop;
         w < frames && w * spec.hop < end; ++w) {
      track.midi[w] = note.pitch;
    }
  }
  return track;
}

DatasetSample synth_sample(const SynthConfig& config) {
  config.validate();
  constexpr int sr = kCanonicalSampleRate;
  Rng rng(config.seed);
  DatasetSample out;
  out.provenance = Provenance::Synth;
  out.seed = config.seed;
  out.score = sample_score(config, rng);
  out.audio.sample_rate = sr;
  out.audio.samples.assign(to_samples(config.total_duration, sr), 0.0f);

  for (const auto& note : out.score) {
    const auto waveform = static_cast<Waveform>(rng.below(kNumWaveforms));
    const std::size_t begin = to_samples(note.onset, sr);
    const std::size_t end = to_samples(note.onset + note.duration, sr);
    const auto rendered = render_note(note.pitch, static_cast<double>(end - begin) / sr,
                                      note.amplitude, waveform, rng, sr);
    place(out.audio.samples, begin, rendered.samples);
  }

  out.filtered = rng.bernoulli(config.filter_probability);
  out.cutoff_hz = rng.uniform(config.cutoff_min, config.cutoff_max);
  if (out.filtered) {
    lowpass(out.audio.samples, out.cutoff_hz, sr, config.filter);
  }

  const double sigma = config.noise_amplitude * peak_of(out.audio.samples);
  for (float& s : out.audio.samples) {
    s = static_cast<float>(s + sigma * rng.normal());
  }
  normalize_if_clipping(out.audio.samples);

  out.labels = score_labels(out.score, out.audio.samples.size());
  return out;
}

std::vector<float> trim_silence(std::span<const float> samples, int sample_rate) {
  const std::size_t frame = std::max<std::size_t>(1, to_samples(kTrimFrameSeconds, sample_rate));
  const double gate = kTrimRelativeRms * peak_of(samples);
  const std::size_t frames = (samples.size() + frame - 1) / frame;
  auto loud = [&](std::size_t f) {
    const std::size_t lo = f * frame;
    const std::size_t hi = std::min(samples.size(), lo + frame);
    double energy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      energy += static_cast<double>(samples[i]) * samples[i];
    }
    return std::sqrt(energy / static_cast<double>(hi - lo)) >= gate && gate > 0.0;
  };
  std::size_t first = 0;
  while (first < frames && !loud(first)) {
    ++first;
  }
  if (first == frames) {
    return {};
  }
  std::size_t last = frames - 1;
  while (last > first && !loud(last)) {
    --last;
  }
  const std::size_t lo = first * frame;
  const std::size_t hi = std::min(samples.size(), (last + 1) * frame);
  return {samples.begin() + static_cast<std::ptrdiff_t>(lo),
          samples.begin() + static_cast<std::ptrdiff_t>(hi)};
}

DatasetSample vowel_sample(std::span<const AudioBuffer> library,
                           const SynthConfig& config, const TrackerConfig& tracker) {
  if (library.empty()) {
    throw InvalidArgument("vowel library is empty");
  }
  config.validate();
  constexpr int sr = kCanonicalSampleRate;
  Rng rng(config.seed);
  DatasetSample out;
  out.provenance = Provenance::Vowel;
  out.seed = config.seed;
  out.score = sample_score(config, rng);
  out.audio.sample_rate = sr;
  out.audio.samples.assign(to_samples(config.total_duration, sr), 0.0f);

  for (auto& note : out.score) {
    note.pitch = 0.0;  // pitch comes from the recording, not the score
    const auto& source = library[rng.below(library.size())];
    const AudioBuffer at_rate = resample_to_44100(source);
    const auto trimmed = trim_silence(at_rate.samples, sr);
    if (trimmed.size() < to_samples(kMinTrimmedSeconds, sr)) {
      throw InvalidArgument("vowel recording shorter than 50 ms after trimming");
    }
    const std::size_t begin = to_samples(note.onset, sr);
    const std::size_t end = to_samples(note.onset + note.duration, sr);
    auto stretched = stretch_to_length(trimmed, end - begin);
    const double peak = peak_of(stretched);
    if (peak > 0.0) {
      const double gain = note.amplitude / peak;
      for (float& s : stretched) {
        s = static_cast<float>(s * gain);
      }
    }
    place(out.audio.samples, begin, stretched);
  }
  normalize_if_clipping(out.audio.samples);
  out.labels = label(out.audio, tracker);
  return out;
}

std::vector<DatasetSample> segment_and_label(const AudioBuffer& recording,
                                             double segment_s,
                                             const TrackerConfig& tracker) {
  validate(recording);
  if (recording.sample_rate != kCanonicalSampleRate) {
    throw InvalidArgument("segment_and_label expects 44100 Hz audio");
  }
  if (!(segment_s > 0.0)) {
    throw InvalidArgument("segment length must be positive");
  }
  const std::size_t seg_len = to_samples(segment_s, recording.sample_rate);
  std::vector<DatasetSample> out;
  for (std::size_t start = 0; start < recording.samples.size(); start += seg_len) {
    DatasetSample sample;
    sample.provenance = Provenance::Segmented;
    sample.audio.sample_rate = recording.sample_rate;
    sample.audio.samples.assign(seg_len, 0.0f);
    const std::size_t n = std::min(seg_len, recording.samples.size() - start);
    std::copy_n(recording.samples.begin() + static_cast<std::ptrdiff_t>(start), n,
                sample.audio.samples.begin());
    sample.labels = label(sample.audio, tracker);
    out.push_back(std::move(sample));
  }
  return out;
}

ManifestRow write_sample(const DatasetSample& sample,
                         const std::filesystem::path& dir, const std::string& name) {
  write_wav(sample.audio, dir / (name + ".wav"));
  write_track_csv(sample.labels, dir / (name + ".csv"));
  return {name, sample.provenance, sample.seed, sample.audio.duration()};
}

void write_manifest(std::span<const ManifestRow> rows,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "name,provenance,seed,duration_s\n";
  char duration[32];
  for (const auto& row : rows) {
    std::snprintf(duration, sizeof duration, "%.6f", row.duration_s);
    out << row.name << ',' << to_string(row.provenance) << ',' << row.seed << ','
        << duration << '\n';
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line) || line != "name,provenance,seed,duration_s") {
    throw FormatError("expected manifest header", 0);
  }
  offset = line.size() + 1;
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    const std::uint64_t at = offset;
    offset += line.size() + 1;
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string name, prov, seed, duration;
    if (!std::getline(ss, name, ',') || !std::getline(ss, prov, ',') ||
        !std::getline(ss, seed, ',') || !std::getline(ss, duration)) {
      throw FormatError("malformed manifest row", at);
    }
    try {
      rows.push_back({name, parse_provenance(prov, at), std::stoull(seed),
                      std::stod(duration)});
    } catch (const std::logic_error&) {
      throw FormatError("malformed manifest row", at);
    }
  }
  return rows;
}

double total_duration_s(std::span<const ManifestRow> rows) {
  double total = 0.0;
  for (const auto& r : rows) {
    total += r.duration_s;
  }
  return total;
}

} // namespace pitchnet
