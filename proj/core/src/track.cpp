#include "pitchnet/track.hpp"

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "pitchnet/error.hpp"

namespace pitchnet {

namespace {

constexpr const char* kHeader = "time_s,midi";

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) {
    return false;
  }
  char* end = nullptr;
  errno = 0;
  out = std::strtod(text.c_str(), &end);
  return errno == 0 && end == text.c_str() + text.size();
}

} // namespace

void write_track_csv(const PitchTrack& track, const std::filesystem::path& path) {
  if (track.frame_times.size() != track.midi.size()) {
    throw InvalidArgument("track has mismatched time and pitch columns");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << kHeader << '\n';
  char line[64];
  for (std::size_t i = 0; i < track.size(); ++i) {
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", track.frame_times[i],
                  track.midi[i] + 0.0);
    out << line;
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

PitchTrack read_track_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  PitchTrack track;
  std::string line;
  std::uint64_t offset = 0;
  if (!std::getline(in, line)) {
    throw FormatError("empty label file", 0);
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != kHeader) {
    throw FormatError("expected header 'time_s,midi'", 0);
  }
  offset = line.size() + 1;
  while (std::getline(in, line)) {
    const std::uint64_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto comma = line.find(',');
    double t = 0.0;
    double m = 0.0;
    if (comma == std::string::npos || !parse_double(line.substr(0, comma), t) ||
        !parse_double(line.substr(comma + 1), m)) {
      throw FormatError("malformed label row '" + line + "'", line_start);
    }
    track.frame_times.push_back(t);
    track.midi.push_back(m);
  }
  return track;
}

} // namespace pitchnet
