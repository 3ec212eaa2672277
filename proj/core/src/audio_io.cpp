#include "pitchnet/audio_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string_view>

#include "pitchnet/error.hpp"

namespace pitchnet {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t load_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t load_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

void store_tag(std::vector<std::uint8_t>& out, std::string_view tag) {
  out.insert(out.end(), tag.begin(), tag.end());
}

struct WavFormat {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

WavFormat parse_fmt(const std::uint8_t* p, std::uint32_t size,
                    std::uint64_t offset) {
  if (size < 16) {
    throw FormatError("fmt chunk shorter than 16 bytes", offset);
  }
  WavFormat fmt;
  fmt.tag = load_u16(p);
  fmt.channels = load_u16(p + 2);
  fmt.sample_rate = load_u32(p + 4);
  fmt.block_align = load_u16(p + 12);
  fmt.bits = load_u16(p + 14);
  if (fmt.tag == kFormatExtensible) {
    if (size < 40) {
      throw FormatError("extensible fmt chunk shorter than 40 bytes", offset);
    }
    // The sub-format GUID starts at byte 24; its first two bytes carry the
    // plain format tag.
    fmt.tag = load_u16(p + 24);
  }
  if (fmt.channels == 0) {
    throw FormatError("zero channels", offset + 2);
  }
  if (fmt.sample_rate == 0) {
    throw FormatError("zero sample rate", offset + 4);
  }
  const bool pcm = fmt.tag == kFormatPcm &&
                   (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool flt = fmt.tag == kFormatFloat && fmt.bits == 32;
  if (!pcm && !flt) {
    throw FormatError("unsupported encoding (format tag " +
                          std::to_string(fmt.tag) + ", " +
                          std::to_string(fmt.bits) + " bits)",
                      offset);
  }
  if (fmt.block_align != fmt.channels * (fmt.bits / 8)) {
    throw FormatError("block align disagrees with channels and bit depth",
                      offset + 12);
  }
  return fmt;
}

double decode_sample(const std::uint8_t* p, const WavFormat& fmt) {
  switch (fmt.bits) {
    case 16: {
      const auto v = static_cast<std::int16_t>(load_u16(p));
      return v / 32767.0;
    }
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) {
        v -= 0x1000000;
      }
      return v / 8388607.0;
    }
    default: {
      const std::uint32_t bits = load_u32(p);
      if (fmt.tag == kFormatFloat) {
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return f;
      }
      return static_cast<std::int32_t>(bits) / 2147483647.0;
    }
  }
}

double sinc(double x) {
  if (x == 0.0) {
    return 1.0;
  }
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

// Half-width of the interpolation kernel, in zero crossings of the sinc.
constexpr double kZeroCrossings = 16.0;
constexpr double kKaiserBeta = 8.6;
// Passband edge as a fraction of the lower of the two Nyquist rates.
constexpr double kRolloff = 0.95;
constexpr std::size_t kTaperTableSize = 8192;

// Kaiser taper sampled on r in [0, 1], linearly interpolated at lookup.
const std::vector<double>& taper_table() {
  static const std::vector<double> table = [] {
    std::vector<double> t(kTaperTableSize + 1);
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (std::size_t i = 0; i <= kTaperTableSize; ++i) {
      const double r = static_cast<double>(i) / kTaperTableSize;
      t[i] = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
             i0_beta;
    }
    return t;
  }();
  return table;
}

double kaiser_taper(double r) {
  const double pos = std::min(std::abs(r), 1.0) * kTaperTableSize;
  const auto i = static_cast<std::size_t>(pos);
  if (i >= kTaperTableSize) {
    return taper_table()[kTaperTableSize];
  }
  const double frac = pos - static_cast<double>(i);
  const auto& t = taper_table();
  return t[i] + frac * (t[i + 1] - t[i]);
}

} // namespace

void validate(const AudioBuffer& buffer) {
  if (buffer.sample_rate <= 0) {
    throw InvalidArgument("sample rate must be positive");
  }
  for (float s : buffer.samples) {
    if (!std::isfinite(s)) {
      throw InvalidArgument("audio buffer contains non-finite samples");
    }
  }
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  const std::vector<std::uint8_t> bytes(
      (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::uint64_t size = bytes.size();

  if (size < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
    throw FormatError("missing RIFF header", 0);
  }
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("RIFF form type is not WAVE", 8);
  }

  WavFormat fmt;
  bool have_fmt = false;
  std::uint64_t pos = 12;
  while (pos + 8 <= size) {
    const std::uint8_t* header = bytes.data() + pos;
    const std::uint32_t chunk_size = load_u32(header + 4);
    const std::uint64_t body = pos + 8;
    if (body + chunk_size > size) {
      throw FormatError("chunk '" + std::string(header, header + 4) +
                            "' declares " + std::to_string(chunk_size) +
                            " bytes but only " + std::to_string(size - body) +
                            " remain",
                        pos + 4);
    }
    if (std::memcmp(header, "fmt ", 4) == 0) {
      fmt = parse_fmt(bytes.data() + body, chunk_size, body);
      have_fmt = true;
    } else if (std::memcmp(header, "data", 4) == 0) {
      if (!have_fmt) {
        throw FormatError("data chunk precedes fmt chunk", pos);
      }
      if (chunk_size % fmt.block_align != 0) {
        throw FormatError("data length is not a whole number of frames",
                          pos + 4);
      }
      const std::size_t frames = chunk_size / fmt.block_align;
      const std::size_t width = fmt.bits / 8;
      AudioBuffer out;
      out.sample_rate = static_cast<int>(fmt.sample_rate);
      out.samples.resize(frames);
      const std::uint8_t* p = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt.channels; ++c) {
          acc += decode_sample(p, fmt);
          p += width;
        }
        const double mono = acc / fmt.channels;
        out.samples[i] = static_cast<float>(std::clamp(mono, -1.0, 1.0));
      }
      return out;
    }
    pos = body + chunk_size + (chunk_size & 1u);
  }
  throw FormatError(have_fmt ? "no data chunk" : "no fmt chunk", pos);
}

void write_wav(const AudioBuffer& buffer, const std::filesystem::path& path) {
  const auto data_bytes = static_cast<std::uint32_t>(buffer.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  store_tag(out, "RIFF");
  store_u32(out, 36 + data_bytes);
  store_tag(out, "WAVE");
  store_tag(out, "fmt ");
  store_u32(out, 16);
  store_u16(out, kFormatPcm);
  store_u16(out, 1);
  store_u32(out, static_cast<std::uint32_t>(buffer.sample_rate));
  store_u32(out, static_cast<std::uint32_t>(buffer.sample_rate) * 2);
  store_u16(out, 2);
  store_u16(out, 16);
  store_tag(out, "data");
  store_u32(out, data_bytes);
  for (float s : buffer.samples) {
    const double clamped = std::clamp(static_cast<double>(s), -1.0, 1.0);
    const auto q = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    store_u16(out, static_cast<std::uint16_t>(q));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw IoError("write failed for " + path.string());
  }
}

std::vector<float> stretch_to_length(std::span<const float> samples,
                                     std::size_t out_len) {
  std::vector<float> out(out_len, 0.0f);
  const std::size_t in_len = samples.size();
  if (in_len == 0 || out_len == 0) {
    return out;
  }
  const double step = static_cast<double>(in_len) / out_len;
  const double cutoff = kRolloff * std::min(1.0, 1.0 / step);
  const double half_width = kZeroCrossings / cutoff;

  for (std::size_t i = 0; i < out_len; ++i) {
    const double center = static_cast<double>(i) * in_len / out_len;
    const auto lo = static_cast<std::int64_t>(std::ceil(center - half_width));
    const auto hi = static_cast<std::int64_t>(std::floor(center + half_width));
    double acc = 0.0;
    for (std::int64_t j = std::max<std::int64_t>(lo, 0);
         j <= std::min<std::int64_t>(hi, static_cast<std::int64_t>(in_len) - 1);
         ++j) {
      const double d = center - static_cast<double>(j);
      acc += samples[static_cast<std::size_t>(j)] * cutoff * sinc(cutoff * d) *
             kaiser_taper(d / half_width);
    }
    out[i] = static_cast<float>(acc);
  }
  return out;
}

AudioBuffer resample(const AudioBuffer& buffer, int target_rate) {
  validate(buffer);
  if (target_rate <= 0) {
    throw InvalidArgument("target sample rate must be positive");
  }
  if (target_rate == buffer.sample_rate) {
    return buffer;
  }
  const auto n = static_cast<std::int64_t>(buffer.samples.size());
  const auto out_len = static_cast<std::size_t>(std::llround(
      static_cast<double>(n) * target_rate / buffer.sample_rate));
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples = stretch_to_length(buffer.samples, out_len);
  return out;
}

AudioBuffer resample_to_44100(const AudioBuffer& buffer) {
  return resample(buffer, kCanonicalSampleRate);
}

} // namespace pitchnet
