#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace pitchnet {

/// Per-frame MIDI pitch on the analysis grid; 0 marks unvoiced frames.
struct PitchTrack {
  std::vector<double> frame_times;
  std::vector<double> midi;

  std::size_t size() const { return midi.size(); }
};

/// Label CSV: header `time_s,midi`, one row per frame, six decimals.
void write_track_csv(const PitchTrack& track, const std::filesystem::path& path);

/// Throws FormatError (offset = byte position of the offending line) on a bad
/// header or row.
PitchTrack read_track_csv(const std::filesystem::path& path);

} // namespace pitchnet
