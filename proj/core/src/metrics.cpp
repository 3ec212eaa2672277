#include "pitchnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "pitchnet/error.hpp"

namespace pitchnet {

namespace {

void check_lengths(const PitchTrack& pred, const PitchTrack& truth) {
  if (pred.size() != truth.size()) {
    throw InvalidArgument("track lengths differ: prediction has " +
                          std::to_string(pred.size()) + " frames, truth has " +
                          std::to_string(truth.size()));
  }
}

bool scored(double pred, const EvalOptions& options) {
  return pred != 0.0 || options.score_unvoiced_predictions;
}

} // namespace

std::vector<double> frame_errors(const PitchTrack& pred, const PitchTrack& truth,
                                 const EvalOptions& options) {
  return frame_errors_delayed(pred, truth, 0, options);
}

std::vector<double> frame_errors_delayed(const PitchTrack& pred, const PitchTrack& truth,
                                         std::size_t shift_frames,
                                         const EvalOptions& options) {
  check_lengths(pred, truth);
  const auto n = static_cast<std::ptrdiff_t>(truth.size());
  const auto shift = static_cast<std::ptrdiff_t>(shift_frames);
  std::vector<double> errors;
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    if (truth.midi[ut] == 0.0 || !scored(pred.midi[ut], options)) {
      continue;
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::ptrdiff_t s = -shift; s <= shift; ++s) {
      const std::ptrdiff_t u = t + s;
      if (u < 0 || u >= n || truth.midi[static_cast<std::size_t>(u)] == 0.0) {
        continue;
      }
      best = std::min(best, 100.0 * std::abs(pred.midi[ut] -
                                             truth.midi[static_cast<std::size_t>(u)]));
    }
    errors.push_back(best);
  }
  return errors;
}

double percentile(std::span<const double> values, double p) {
  if (values.empty()) {
    throw InvalidArgument("percentile of an empty sample");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::optional<EvalReport> summarize(std::span<const double> errors,
                                    const EvalOptions& options) {
  if (errors.empty()) {
    return std::nullopt;
  }
  EvalReport r;
  r.voiced_frames = errors.size();
  std::size_t hits = 0;
  double sum = 0.0;
  for (double e : errors) {
    hits += e <= options.tolerance_cents ? 1 : 0;
    sum += e;
  }
  r.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
  r.err_mean = sum / static_cast<double>(errors.size());
  r.err_p25 = percentile(errors, 25.0);
  r.err_median = percentile(errors, 50.0);
  r.err_p75 = percentile(errors, 75.0);
  r.err_p99 = percentile(errors, 99.0);
  return r;
}

std::optional<EvalReport> evaluate(const PitchTrack& pred, const PitchTrack& truth,
                                   const EvalOptions& options) {
  return summarize(frame_errors(pred, truth, options), options);
}

std::optional<EvalReport> evaluate_delayed(const PitchTrack& pred, const PitchTrack& truth,
                                           std::size_t shift_frames,
                                           const EvalOptions& options) {
  return summarize(frame_errors_delayed(pred, truth, shift_frames, options), options);
}

std::string format_report_table(const std::string& label, const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-10s %8s %10s %10s %12s %10s %10s\n"
                "%-10s %8.2f %10.2f %10.2f %12.2f %10.2f %10.2f\n",
                "Dataset", "Acc.", "Err. Mean", "Err. 25th", "Err. Median", "Err. 75th",
                "Err. 99th", label.c_str(), r.accuracy, r.err_mean, r.err_p25, r.err_median,
                r.err_p75, r.err_p99);
  return buf;
}

std::string format_report_kv(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "accuracy_50c=%.6f\nerr_mean=%.6f\nerr_p25=%.6f\nerr_median=%.6f\n"
                "err_p75=%.6f\nerr_p99=%.6f\nvoiced_frame_count=%zu\n",
                r.accuracy, r.err_mean, r.err_p25, r.err_median, r.err_p75, r.err_p99,
                r.voiced_frames);
  return buf;
}

} // namespace pitchnet
