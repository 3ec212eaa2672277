#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pitchnet/track.hpp"

namespace pitchnet {

struct EvalOptions {
  /// When false, frames with voiced truth but an unvoiced prediction are left
  /// out instead of being scored against the silence sentinel.
  bool score_unvoiced_predictions = true;
  double tolerance_cents = 50.0;
};

struct EvalReport {
  double accuracy = 0.0;  // percent of frames within tolerance
  double err_mean = 0.0;  // cents
  double err_p25 = 0.0;
  double err_median = 0.0;
  double err_p75 = 0.0;
  double err_p99 = 0.0;
  std::size_t voiced_frames = 0;
};

/// Absolute error in cents, 100 * |pred - truth|, for every frame with voiced
/// truth. An unvoiced prediction (0) is scored as-is unless the options
/// say otherwise. Throws InvalidArgument on a length mismatch.
std::vector<double> frame_errors(const PitchTrack& pred, const PitchTrack& truth,
                                 const EvalOptions& options = {});

/// Same, but each frame takes the smallest error against the voiced truth
/// frames within +-shift_frames.
std::vector<double> frame_errors_delayed(const PitchTrack& pred, const PitchTrack& truth,
                                         std::size_t shift_frames = 1,
                                         const EvalOptions& options = {});

/// Percentile by linear interpolation between order statistics:
/// position (p / 100) * (n - 1) in the sorted sample.
double percentile(std::span<const double> values, double p);

/// Aggregate a list of cents errors; nullopt when the list is empty.
std::optional<EvalReport> summarize(std::span<const double> errors,
                                    const EvalOptions& options = {});

std::optional<EvalReport> evaluate(const PitchTrack& pred, const PitchTrack& truth,
                                   const EvalOptions& options = {});

std::optional<EvalReport> evaluate_delayed(const PitchTrack& pred, const PitchTrack& truth,
                                           std::size_t shift_frames = 1,
                                           const EvalOptions& options = {});

/// Aligned table with the columns Acc., Err. Mean, Err. 25th, Err. Median,
/// Err. 75th and Err. 99th.
std::string format_report_table(const std::string& label, const EvalReport& report);

/// `key=value` lines, one per field.
std::string format_report_kv(const EvalReport& report);

} // namespace pitchnet
