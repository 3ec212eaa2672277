#include "pitchnet/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pitchnet/error.hpp"
#include "pitchnet/pitch_codec.hpp"

namespace pitchnet {

void TrackerConfig::validate(int sample_rate) const {
  if (!(f_min > 0.0 && f_min < f_max && f_max < sample_rate / 2.0)) {
    throw InvalidArgument("tracker requires 0 < f_min < f_max < sample_rate/2");
  }
  if (octave_cost < 0.0 || voiced_unvoiced_cost < 0.0 || octave_jump_cost < 0.0) {
    throw InvalidArgument("tracker costs must be non-negative");
  }
  if (silence_threshold < 0.0) {
    throw InvalidArgument("silence threshold must be non-negative");
  }
  if (max_candidates < 1) {
    throw InvalidArgument("max_candidates must be at least 1");
  }
}

std::vector<PitchCandidate> candidates_for_frame(std::span<const double> acf,
                                                 const TrackerConfig& config,
                                                 int sample_rate) {
  std::vector<PitchCandidate> out{{0.0, config.voicing_threshold}};
  if (acf.size() < 3 || acf.front() <= 0.0) {
    return out;
  }
  const double min_lag = sample_rate / config.f_max;
  const double max_lag = sample_rate / config.f_min;
  const auto first = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_lag)));
  const std::size_t last = std::min(static_cast<std::size_t>(std::floor(max_lag)),
                                    acf.size() - 2);

  std::vector<PitchCandidate> voiced;
  for (std::size_t k = first; k <= last; ++k) {
    const double a = acf[k - 1];
    const double b = acf[k];
    const double c = acf[k + 1];
    if (!(b > 0.0 && b > a && b >= c)) {
      continue;
    }
    double offset = 0.0;
    double peak = b;
    const double curvature = a - 2.0 * b + c;
    if (curvature < 0.0) {
      offset = 0.5 * (a - c) / curvature;
      peak = b - 0.25 * (a - c) * offset;
    }
    const double lag = static_cast<double>(k) + offset;
    if (lag < min_lag || lag > max_lag) {
      continue;
    }
    const double strength =
        peak - config.octave_cost * std::log2(config.f_min * lag / sample_rate);
    voiced.push_back({lag, strength});
  }
  std::stable_sort(voiced.begin(), voiced.end(),
                   [](const PitchCandidate& x, const PitchCandidate& y) {
                     return x.strength > y.strength;
                   });
  const std::size_t keep = std::min(voiced.size(), config.max_candidates - 1);
  out.insert(out.end(), voiced.begin(), voiced.begin() + static_cast<std::ptrdiff_t>(keep));
  return out;
}

double transition_cost(const PitchCandidate& from, const PitchCandidate& to,
                       const TrackerConfig& config) {
  const bool v1 = from.voiced();
  const bool v2 = to.voiced();
  if (!v1 && !v2) {
    return 0.0;
  }
  if (v1 != v2) {
    return config.voiced_unvoiced_cost;
  }
  return config.octave_jump_cost * std::abs(std::log2(from.lag / to.lag));
}

PathResult best_path(std::span<const std::vector<PitchCandidate>> frames,
                     const TrackerConfig& config, const FrameSpec& spec,
                     std::span<const double> frame_volumes) {
  const std::size_t count = frames.size();
  PathResult result;
  result.track.frame_times.resize(count);
  result.track.midi.assign(count, 0.0);
  for (std::size_t t = 0; t < count; ++t) {
    result.track.frame_times[t] = static_cast<double>(t * spec.hop) / spec.sample_rate;
  }
  if (count == 0) {
    return result;
  }
  if (!frame_volumes.empty() && frame_volumes.size() != count) {
    throw InvalidArgument("frame volume count differs from candidate frames");
  }

  double loudest = 0.0;
  for (double v : frame_volumes) {
    loudest = std::max(loudest, v);
  }
  auto allowed = [&](std::size_t t, const PitchCandidate& c) {
    if (frame_volumes.empty() || !c.voiced()) {
      return true;
    }
    return loudest > 0.0 && frame_volumes[t] >= config.silence_threshold * loudest;
  };

  constexpr double kBlocked = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> score(count);
  std::vector<std::vector<std::size_t>> back(count);
  for (std::size_t t = 0; t < count; ++t) {
    if (frames[t].empty()) {
      throw InvalidArgument("frame " + std::to_string(t) + " has no candidates");
    }
    score[t].assign(frames[t].size(), kBlocked);
    back[t].assign(frames[t].size(), 0);
    for (std::size_t j = 0; j < frames[t].size(); ++j) {
      const auto& cand = frames[t][j];
      if (!allowed(t, cand)) {
        continue;
      }
      if (t == 0) {
        score[t][j] = cand.strength;
        continue;
      }
      double best = kBlocked;
      std::size_t arg = 0;
      for (std::size_t i = 0; i < frames[t - 1].size(); ++i) {
        if (score[t - 1][i] == kBlocked) {
          continue;
        }
        const double s =
            score[t - 1][i] - transition_cost(frames[t - 1][i], cand, config);
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      score[t][j] = best + cand.strength;
      back[t][j] = arg;
    }
  }

  const auto& last = score[count - 1];
  std::size_t j = 0;
  for (std::size_t i = 1; i < last.size(); ++i) {
    if (last[i] > last[j]) {
      j = i;
    }
  }
  if (last[j] == kBlocked) {
    throw InvalidArgument("no admissible path (frames without unvoiced candidate)");
  }
  result.score = last[j];
  result.choice.resize(count);
  for (std::size_t t = count; t-- > 0;) {
    result.choice[t] = j;
    const auto& cand = frames[t][j];
    result.track.midi[t] = cand.voiced() ? hz_to_midi(spec.sample_rate / cand.lag) : 0.0;
    j = back[t][j];
  }
  return result;
}

PitchTrack label_features(const FeatureTensor& features,
                          const TrackerConfig& config, const FrameSpec& spec) {
  config.validate(spec.sample_rate);
  std::vector<std::vector<PitchCandidate>> lists(features.frames);
  std::vector<double> volumes(features.frames);
  std::vector<double> acf(features.bins);
  for (std::size_t t = 0; t < features.frames; ++t) {
    const auto row = features.row(t, Channel::Autocorrelation);
    std::copy(row.begin(), row.end(), acf.begin());
    lists[t] = candidates_for_frame(acf, config, spec.sample_rate);
    volumes[t] = features.at(t, Channel::Volume, 0);
  }
  auto result = best_path(lists, config, spec, volumes);
  result.track.frame_times = features.frame_times;
  return std::move(result.track);
}

PitchTrack label(const AudioBuffer& buffer, const TrackerConfig& config,
                 const FrameSpec& spec) {
  return label_features(preprocess(buffer, spec), config, spec);
}

} // namespace pitchnet
