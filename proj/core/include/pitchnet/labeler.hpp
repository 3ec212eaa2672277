#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pitchnet/audio_io.hpp"
#include "pitchnet/dsp.hpp"
#include "pitchnet/track.hpp"

namespace pitchnet {

/// Parameters of the autocorrelation tracker. Defaults follow the usual
/// Boersma/Praat values, widened to the singing range, except octave_cost:
/// with 1024-sample frames the corrected autocorrelation of a steady tone is
/// nearly flat across period multiples, and 0.01 lets the path lock onto the
/// sub-octave for whole notes.
struct TrackerConfig {
  double f_min = 55.0;
  double f_max = 1760.0;
  double voicing_threshold = 0.45;
  /// Frames quieter than this fraction of the loudest frame are unvoiced.
  double silence_threshold = 0.03;
  double octave_cost = 0.03;
  double voiced_unvoiced_cost = 0.14;
  double octave_jump_cost = 0.35;
  std::size_t max_candidates = 15;

  void validate(int sample_rate) const;
};

struct PitchCandidate {
  double lag = 0.0;  // samples; 0 is the unvoiced candidate
  double strength = 0.0;

  bool voiced() const { return lag > 0.0; }
};

/// Pitch candidates of one frame from its corrected autocorrelation row.
///
/// Voiced candidates are the positive local maxima inside the lag band
/// [sample_rate / f_max, sample_rate / f_min] (clipped to the available lags),
/// refined by parabolic interpolation. Their strength is the interpolated peak
/// minus octave_cost * log2(f_min * lag / sample_rate). The result holds the
/// unvoiced candidate (strength = voicing_threshold) first, followed by at
/// most max_candidates - 1 voiced candidates in decreasing strength.
std::vector<PitchCandidate> candidates_for_frame(std::span<const double> acf,
                                                 const TrackerConfig& config,
                                                 int sample_rate);

/// Index path of the best candidate sequence plus the resulting track.
struct PathResult {
  std::vector<std::size_t> choice;
  double score = 0.0;
  PitchTrack track;
};

/// Score of a path: sum of chosen strengths minus transition costs, where a
/// voicing change costs voiced_unvoiced_cost and consecutive voiced frames
/// cost octave_jump_cost * |log2(lag_prev / lag_next)|.
double transition_cost(const PitchCandidate& from, const PitchCandidate& to,
                       const TrackerConfig& config);

/// Viterbi search for the path of maximal score.
///
/// Ties are broken toward the lower candidate index, first for the final
/// frame and then for each predecessor during backtracking; among equally
/// scored paths this selects the one that is smallest when compared from the
/// last frame backwards. When `frame_volumes` is given, frames whose volume
/// is below silence_threshold times the loudest frame are restricted to
/// unvoiced candidates.
PathResult best_path(std::span<const std::vector<PitchCandidate>> frames,
                     const TrackerConfig& config, const FrameSpec& spec,
                     std::span<const double> frame_volumes = {});

/// preprocess -> candidates_for_frame -> best_path.
PitchTrack label(const AudioBuffer& buffer, const TrackerConfig& config = {},
                 const FrameSpec& spec = {});

/// Same as label() on already computed features.
PitchTrack label_features(const FeatureTensor& features,
                          const TrackerConfig& config = {},
                          const FrameSpec& spec = {});

} // namespace pitchnet
