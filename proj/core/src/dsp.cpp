#include "pitchnet/dsp.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "fft.hpp"
#include "pitchnet/error.hpp"

namespace pitchnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kWindowAcfFloor = 1e-12;
constexpr std::array<char, 4> kFeatureMagic = {'P', 'F', 'T', '1'};

double wrap_phase(double p) {
  p = std::fmod(p, kTwoPi);
  if (p < 0.0) {
    p += kTwoPi;
  }
  if (p >= kTwoPi) {
    p = 0.0;
  }
  return p + 0.0;  // folds -0.0 into +0.0
}

float phase_to_float(double p) {
  const auto f = static_cast<float>(p);
  return static_cast<double>(f) >= kTwoPi ? 0.0f : f;
}

// Raw (unnormalized) autocorrelation for lags 0..len/2 via a zero-padded FFT.
std::vector<double> raw_autocorrelation(std::span<const double> signal) {
  const std::size_t len = signal.size();
  auto& fft = detail::thread_local_fft(2 * len);
  std::vector<std::complex<double>> bins(len + 1);
  fft.forward(signal, bins);
  for (auto& b : bins) {
    b = std::norm(b);
  }
  std::vector<double> acf(2 * len);
  fft.inverse(bins, acf);
  acf.resize(len / 2 + 1);
  const double scale = 1.0 / static_cast<double>(2 * len);
  for (double& v : acf) {
    v *= scale;
  }
  return acf;
}

std::vector<double> normalized(std::vector<double> acf) {
  const double r0 = acf.front();
  if (r0 <= 0.0) {
    std::fill(acf.begin(), acf.end(), 0.0);
    return acf;
  }
  for (double& v : acf) {
    v /= r0;
  }
  return acf;
}

std::vector<double> corrected_from_window_acf(
    std::span<const double> raw_window, std::span<const double> hann,
    std::span<const double> window_acf) {
  std::vector<double> tapered(raw_window.size());
  for (std::size_t n = 0; n < raw_window.size(); ++n) {
    tapered[n] = raw_window[n] * hann[n];
  }
  auto acf = normalized(raw_autocorrelation(tapered));
  if (acf.front() == 0.0) {
    return acf;
  }
  for (std::size_t k = 0; k < acf.size(); ++k) {
    acf[k] = window_acf[k] < kWindowAcfFloor ? 0.0 : acf[k] / window_acf[k];
  }
  return acf;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {
      static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
      static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& bytes, std::size_t pos) {
  return static_cast<std::uint32_t>(bytes[pos]) |
         (static_cast<std::uint32_t>(bytes[pos + 1]) << 8) |
         (static_cast<std::uint32_t>(bytes[pos + 2]) << 16) |
         (static_cast<std::uint32_t>(bytes[pos + 3]) << 24);
}

} // namespace

void FrameSpec::validate() const {
  if (window_len < 2 || !std::has_single_bit(window_len)) {
    throw InvalidArgument("window length must be a power of two >= 2");
  }
  if (hop == 0 || hop > window_len) {
    throw InvalidArgument("hop must satisfy 0 < hop <= window length");
  }
  if (sample_rate <= 0) {
    throw InvalidArgument("sample rate must be positive");
  }
}

std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec) {
  return (num_samples + spec.hop - 1) / spec.hop;
}

Frames frame_signal(const AudioBuffer& buffer, const FrameSpec& spec) {
  spec.validate();
  if (buffer.sample_rate != spec.sample_rate) {
    throw InvalidArgument("buffer sample rate " +
                          std::to_string(buffer.sample_rate) +
                          " does not match frame spec rate " +
                          std::to_string(spec.sample_rate));
  }
  const std::size_t len = spec.window_len;
  const auto n = static_cast<std::int64_t>(buffer.samples.size());
  Frames frames;
  frames.count = frame_count(buffer.samples.size(), spec);
  frames.window_len = len;
  frames.samples.assign(frames.count * len, 0.0);
  frames.times.resize(frames.count);
  for (std::size_t w = 0; w < frames.count; ++w) {
    const auto start = static_cast<std::int64_t>(w * spec.hop) -
                       static_cast<std::int64_t>(len / 2);
    double* dst = frames.samples.data() + w * len;
    for (std::size_t m = 0; m < len; ++m) {
      const std::int64_t idx = start + static_cast<std::int64_t>(m);
      if (idx >= 0 && idx < n) {
        dst[m] = buffer.samples[static_cast<std::size_t>(idx)];
      }
    }
    frames.times[w] = static_cast<double>(w * spec.hop) / spec.sample_rate;
  }
  return frames;
}

std::vector<double> hann_window(std::size_t len) {
  if (len < 2) {
    throw InvalidArgument("Hann window length must be >= 2");
  }
  std::vector<double> w(len);
  for (std::size_t n = 0; n < len; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(n) /
                                 static_cast<double>(len)));
  }
  return w;
}

Spectrum spectrum(std::span<const double> window) {
  const std::size_t len = window.size();
  if (len < 2 || !std::has_single_bit(len)) {
    throw InvalidArgument("spectrum length must be a power of two >= 2");
  }
  auto& fft = detail::thread_local_fft(len);
  std::vector<std::complex<double>> bins(len / 2 + 1);
  fft.forward(window, bins);
  Spectrum out;
  out.amplitude.resize(bins.size());
  out.phase.resize(bins.size());
  for (std::size_t k = 0; k < bins.size(); ++k) {
    out.amplitude[k] = std::abs(bins[k]);
    out.phase[k] = wrap_phase(std::arg(bins[k]));
  }
  return out;
}

std::vector<double> phase_correct(std::span<const double> phase,
                                  std::size_t frame_index,
                                  const FrameSpec& spec) {
  const std::size_t len = spec.window_len;
  std::vector<double> out(phase.begin(), phase.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (k == 0 || 2 * k >= len) {
      out[k] = wrap_phase(out[k]);
      continue;
    }
    // The advance 2*pi*w*hop*k/len only matters modulo a full turn; reducing
    // the integer product first keeps the angle small and exact.
    const std::uint64_t turns =
        (static_cast<std::uint64_t>(frame_index % len) * spec.hop % len) * k % len;
    const double advance = kTwoPi * static_cast<double>(turns) /
                           static_cast<double>(len);
    out[k] = wrap_phase(out[k] - advance);
  }
  return out;
}

std::vector<double> corrected_autocorrelation(std::span<const double> raw_window,
                                              std::span<const double> hann) {
  if (raw_window.size() != hann.size()) {
    throw InvalidArgument("frame and window lengths differ");
  }
  const auto window_acf = normalized(raw_autocorrelation(hann));
  return corrected_from_window_acf(raw_window, hann, window_acf);
}

double volume(std::span<const double> raw_window) {
  double peak = 0.0;
  for (double s : raw_window) {
    peak = std::max(peak, std::abs(s));
  }
  return peak;
}

FeatureTensor preprocess(const AudioBuffer& buffer, const FrameSpec& spec) {
  validate(buffer);
  const Frames frames = frame_signal(buffer, spec);
  const std::size_t len = spec.window_len;
  const std::size_t bins = spec.bins();
  const auto hann = hann_window(len);
  const auto window_acf = normalized(raw_autocorrelation(hann));

  FeatureTensor out;
  out.frames = frames.count;
  out.bins = bins;
  out.data.assign(frames.count * kNumChannels * bins, 0.0f);
  out.frame_times = frames.times;

  std::vector<double> tapered(len);
  for (std::size_t w = 0; w < frames.count; ++w) {
    const auto raw = frames.frame(w);
    for (std::size_t n = 0; n < len; ++n) {
      tapered[n] = raw[n] * hann[n];
    }
    const Spectrum spec_w = spectrum(tapered);
    const auto phase = phase_correct(spec_w.phase, w, spec);
    const auto acf = corrected_from_window_acf(raw, hann, window_acf);
    const auto vol = static_cast<float>(volume(raw));
    for (std::size_t k = 0; k < bins; ++k) {
      out.at(w, Channel::Amplitude, k) = static_cast<float>(spec_w.amplitude[k]);
      out.at(w, Channel::Phase, k) = phase_to_float(phase[k]);
      out.at(w, Channel::Autocorrelation, k) = static_cast<float>(acf[k]);
      out.at(w, Channel::Volume, k) = vol;
    }
  }
  return out;
}

void write_features(const FeatureTensor& features,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.write(kFeatureMagic.data(), kFeatureMagic.size());
  put_u32(out, static_cast<std::uint32_t>(features.frames));
  put_u32(out, static_cast<std::uint32_t>(kNumChannels));
  put_u32(out, static_cast<std::uint32_t>(features.bins));
  for (float v : features.data) {
    put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

FeatureTensor read_features(const std::filesystem::path& path,
                            const FrameSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  const std::vector<std::uint8_t> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 ||
      std::memcmp(bytes.data(), kFeatureMagic.data(), kFeatureMagic.size()) != 0) {
    throw FormatError("missing PFT1 magic", 0);
  }
  FeatureTensor out;
  out.frames = get_u32(bytes, 4);
  if (get_u32(bytes, 8) != kNumChannels) {
    throw FormatError("channel count must be 4", 8);
  }
  out.bins = get_u32(bytes, 12);
  const std::size_t count = out.frames * kNumChannels * out.bins;
  if (bytes.size() != 16 + 4 * count) {
    throw FormatError("payload holds " + std::to_string(bytes.size() - 16) +
                          " bytes, header implies " + std::to_string(4 * count),
                      16);
  }
  out.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.data[i] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  }
  out.frame_times.resize(out.frames);
  for (std::size_t w = 0; w < out.frames; ++w) {
    out.frame_times[w] = static_cast<double>(w * spec.hop) / spec.sample_rate;
  }
  return out;
}

} // namespace pitchnet
