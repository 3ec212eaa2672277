#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pitchnet/audio_io.hpp"
#include "pitchnet/datagen.hpp"
#include "pitchnet/dsp.hpp"
#include "pitchnet/error.hpp"
#include "pitchnet/labeler.hpp"
#include "pitchnet/metrics.hpp"
#include "pitchnet/model.hpp"
#include "pitchnet/pitch_codec.hpp"
#include "pitchnet/track.hpp"

namespace fs = std::filesystem;

namespace pitchnet::cli {

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct Options {
  // shared
  fs::path in;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  SynthConfig synth;
  TrackerConfig tracker;
  // vowelgen
  fs::path vowels;
  // segment
  double segment_s = 7.0;
  // infer / init-weights
  fs::path weights;
  int radius = 4;
  // eval
  fs::path pred;
  fs::path truth;
  fs::path report;
  bool delayed = false;
  bool drop_unvoiced = false;
};

void add_synth_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--duration", o.synth.total_duration, "Seconds per sample")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--pitch-min", o.synth.pitch_min, "Lowest MIDI pitch");
  cmd->add_option("--pitch-max", o.synth.pitch_max, "Highest MIDI pitch");
  cmd->add_option("--note-min", o.synth.duration_min, "Shortest note (s)");
  cmd->add_option("--note-max", o.synth.duration_max, "Longest note (s)");
  cmd->add_option("--rest-prob", o.synth.rest_probability, "Probability of a rest slot");
  cmd->add_option("--filter-prob", o.synth.filter_probability,
                  "Probability of a low-pass filter");
  cmd->add_option("--cutoff-min", o.synth.cutoff_min, "Lowest filter cutoff (Hz)");
  cmd->add_option("--cutoff-max", o.synth.cutoff_max, "Highest filter cutoff (Hz)");
  cmd->add_option("--noise", o.synth.noise_amplitude,
                  "Gaussian noise sigma relative to the signal peak");
}

void add_tracker_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--fmin", o.tracker.f_min, "Lowest tracked frequency (Hz)");
  cmd->add_option("--fmax", o.tracker.f_max, "Highest tracked frequency (Hz)");
  cmd->add_option("--voicing-threshold", o.tracker.voicing_threshold);
  cmd->add_option("--silence-threshold", o.tracker.silence_threshold);
  cmd->add_option("--octave-cost", o.tracker.octave_cost);
  cmd->add_option("--voiced-unvoiced-cost", o.tracker.voiced_unvoiced_cost);
  cmd->add_option("--octave-jump-cost", o.tracker.octave_jump_cost);
  cmd->add_option("--max-candidates", o.tracker.max_candidates);
}

// Fails early on an unusable output directory.
void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
  const fs::path probe = dir / "manifest.csv";
  std::ofstream test(probe, std::ios::app);
  if (!test) {
    throw IoError("output directory " + dir.string() + " is not writable");
  }
}

void prepare_out_file(const fs::path& file) {
  const fs::path parent = file.has_parent_path() ? file.parent_path() : fs::path(".");
  if (!fs::is_directory(parent)) {
    throw IoError("output directory " + parent.string() + " does not exist");
  }
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) {
    throw IoError("cannot read " + path.string());
  }
}

AudioBuffer load_audio(const fs::path& path) {
  require_file(path);
  return resample_to_44100(read_wav(path));
}

// Flags echoed next to the manifest so each dataset records how it was made.
void write_command(const fs::path& dir, const std::vector<std::string>& args) {
  std::ofstream out(dir / "command.txt", std::ios::trunc);
  out << "pitchnet";
  for (const auto& a : args) {
    out << ' ' << a;
  }
  out << '\n';
}

std::string sample_name(const char* stem, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06zu", stem, i);
  return buf;
}

int cmd_synthgen(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  o.synth.validate();
  prepare_out_dir(o.out);
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < o.count; ++i) {
    SynthConfig cfg = o.synth;
    cfg.seed = mix_seed(o.seed, i);
    rows.push_back(write_sample(synth_sample(cfg), o.out, sample_name("synth", i)));
  }
  write_manifest(rows, o.out / "manifest.csv");
  write_command(o.out, args);
  out << "wrote " << rows.size() << " samples (" << total_duration_s(rows) << " s) to "
      << o.out.string() << '\n';
  return kSuccess;
}

int cmd_vowelgen(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  o.synth.validate();
  o.tracker.validate(kCanonicalSampleRate);
  if (!fs::is_directory(o.vowels)) {
    throw IoError("vowel directory " + o.vowels.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.vowels)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw InvalidArgument("no .wav files in vowel directory " + o.vowels.string());
  }
  std::vector<AudioBuffer> library;
  for (const auto& f : files) {
    library.push_back(read_wav(f));
  }
  prepare_out_dir(o.out);
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < o.count; ++i) {
    SynthConfig cfg = o.synth;
    cfg.seed = mix_seed(o.seed, i);
    rows.push_back(
        write_sample(vowel_sample(library, cfg, o.tracker), o.out, sample_name("vowel", i)));
  }
  write_manifest(rows, o.out / "manifest.csv");
  write_command(o.out, args);
  out << "wrote " << rows.size() << " samples from " << library.size() << " recordings to "
      << o.out.string() << '\n';
  return kSuccess;
}

int cmd_label(const Options& o, std::ostream& out) {
  o.tracker.validate(kCanonicalSampleRate);
  const AudioBuffer audio = load_audio(o.in);
  prepare_out_file(o.out);
  const PitchTrack track = label(audio, o.tracker);
  write_track_csv(track, o.out);
  out << "labeled " << track.size() << " frames\n";
  return kSuccess;
}

int cmd_segment(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  o.tracker.validate(kCanonicalSampleRate);
  const AudioBuffer audio = load_audio(o.in);
  prepare_out_dir(o.out);
  const auto segments = segment_and_label(audio, o.segment_s, o.tracker);
  const std::string stem = o.in.stem().string();
  std::vector<ManifestRow> rows;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "_seg%03zu", i);
    rows.push_back(write_sample(segments[i], o.out, stem + name));
  }
  write_manifest(rows, o.out / "manifest.csv");
  write_command(o.out, args);
  out << "wrote " << rows.size() << " segments to " << o.out.string() << '\n';
  return kSuccess;
}

int cmd_features(const Options& o, std::ostream& out) {
  const AudioBuffer audio = load_audio(o.in);
  prepare_out_file(o.out);
  const FeatureTensor features = preprocess(audio);
  write_features(features, o.out);
  out << "wrote features T=" << features.frames << " x 4 x " << features.bins << '\n';
  return kSuccess;
}

int cmd_infer(const Options& o, std::ostream& out) {
  require_file(o.weights);
  const ModelConfig config = ModelConfig::standard();
  const WeightStore weights = read_weights(o.weights);
  if (const auto missing = missing_parameters(config, weights); !missing.empty()) {
    std::string names;
    for (const auto& m : missing) {
      names += (names.empty() ? "" : " ") + m;
    }
    throw InvalidArgument("weights incomplete, missing or misshapen: " + names);
  }
  const AudioBuffer audio = load_audio(o.in);
  prepare_out_file(o.out);
  const FeatureTensor features = preprocess(audio);
  if (features.frames == 0) {
    throw InvalidArgument("input audio is empty");
  }
  const LogProbs logp = forward(to_model_input({&features, 1}), config, weights);
  PitchTrack track;
  track.frame_times = features.frame_times;
  track.midi.resize(features.frames);
  std::vector<double> probs(logp.classes);
  for (std::size_t t = 0; t < logp.frames; ++t) {
    const auto row = logp.row(0, t);
    std::transform(row.begin(), row.end(), probs.begin(),
                   [](float v) { return std::exp(static_cast<double>(v)); });
    track.midi[t] = decode_local(probs, o.radius);
  }
  write_track_csv(track, o.out);
  out << "predicted " << track.size() << " frames\n";
  return kSuccess;
}

int cmd_eval(const Options& o, std::ostream& out) {
  require_file(o.pred);
  require_file(o.truth);
  const PitchTrack pred = read_track_csv(o.pred);
  const PitchTrack truth = read_track_csv(o.truth);
  if (pred.size() != truth.size()) {
    throw InvalidArgument("grid mismatch: prediction has " + std::to_string(pred.size()) +
                          " rows, truth has " + std::to_string(truth.size()) + " rows");
  }
  fs::path report = o.report;
  if (report.empty()) {
    report = o.pred;
    report.replace_extension(".eval.txt");
  }
  prepare_out_file(report);
  EvalOptions opts;
  opts.score_unvoiced_predictions = !o.drop_unvoiced;

  std::string kv;
  const auto plain = evaluate(pred, truth, opts);
  if (!plain) {
    out << "no voiced truth frames; nothing to evaluate\n";
    kv = "voiced_frame_count=0\n";
  } else {
    out << format_report_table("plain", *plain);
    kv = format_report_kv(*plain);
    if (o.delayed) {
      const auto delayed = evaluate_delayed(pred, truth, 1, opts);
      const std::string table = format_report_table("delayed", *delayed);
      out << table.substr(table.find('\n') + 1);
      std::istringstream lines(format_report_kv(*delayed));
      for (std::string line; std::getline(lines, line);) {
        kv += "delayed." + line + '\n';
      }
    }
  }
  std::ofstream file(report, std::ios::trunc);
  file << kv;
  if (!file) {
    throw IoError("cannot write report " + report.string());
  }
  return kSuccess;
}

int cmd_init_weights(const Options& o, std::ostream& out) {
  prepare_out_file(o.out);
  const ModelConfig config = ModelConfig::standard();
  const WeightStore weights = random_weights(config, o.seed);
  write_weights(weights, o.out);
  out << count_parameters(config, weights).format();
  return kSuccess;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pitch estimation toolkit: features, auto-labeling, datasets, inference, "
               "evaluation",
               "pitchnet"};
  app.require_subcommand(1);
  Options o;

  auto* synthgen = app.add_subcommand("synthgen", "Generate synthesizer samples with labels");
  synthgen->add_option("--out", o.out, "Output directory")->required();
  synthgen->add_option("--count", o.count, "Number of samples")->required();
  synthgen->add_option("--seed", o.seed, "Base seed")->required();
  add_synth_flags(synthgen, o);

  auto* vowelgen = app.add_subcommand("vowelgen", "Generate time-stretched vowel samples");
  vowelgen->add_option("--vowels", o.vowels, "Directory of vowel recordings")->required();
  vowelgen->add_option("--out", o.out, "Output directory")->required();
  vowelgen->add_option("--count", o.count, "Number of samples")->required();
  vowelgen->add_option("--seed", o.seed, "Base seed")->required();
  add_synth_flags(vowelgen, o);
  add_tracker_flags(vowelgen, o);

  auto* label_cmd = app.add_subcommand("label", "Auto-label a recording");
  label_cmd->add_option("--in", o.in, "Input WAV")->required();
  label_cmd->add_option("--out", o.out, "Output label CSV")->required();
  add_tracker_flags(label_cmd, o);

  auto* segment = app.add_subcommand("segment", "Cut a recording into labeled segments");
  segment->add_option("--in", o.in, "Input WAV")->required();
  segment->add_option("--out", o.out, "Output directory")->required();
  segment->add_option("--segment-s", o.segment_s, "Segment length (s)")
      ->check(CLI::PositiveNumber);
  add_tracker_flags(segment, o);

  auto* features = app.add_subcommand("features", "Write the T x 4 x 513 feature tensor");
  features->add_option("--in", o.in, "Input WAV")->required();
  features->add_option("--out", o.out, "Output PFT1 file")->required();

  auto* infer = app.add_subcommand("infer", "Predict a pitch track with the network");
  infer->add_option("--in", o.in, "Input WAV")->required();
  infer->add_option("--weights", o.weights, "PNW1 weight file")->required();
  infer->add_option("--out", o.out, "Output label CSV")->required();
  infer->add_option("--radius", o.radius, "Decoding window around the peak class")
      ->check(CLI::NonNegativeNumber);

  auto* eval = app.add_subcommand("eval", "Compare a predicted track with the truth");
  eval->add_option("--pred", o.pred, "Predicted label CSV")->required();
  eval->add_option("--truth", o.truth, "Reference label CSV")->required();
  eval->add_flag("--delayed", o.delayed, "Also report the +-10 ms tolerant comparison");
  eval->add_flag("--drop-unvoiced", o.drop_unvoiced,
                 "Skip frames where the prediction is unvoiced");
  eval->add_option("--report", o.report, "Key-value report file (default <pred>.eval.txt)");

  auto* init = app.add_subcommand("init-weights", "Write randomly initialized weights");
  init->add_option("--out", o.out, "Output PNW1 file")->required();
  init->add_option("--seed", o.seed, "Seed")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "pitchnet: usage-error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (synthgen->parsed()) return cmd_synthgen(o, args, out);
    if (vowelgen->parsed()) return cmd_vowelgen(o, args, out);
    if (label_cmd->parsed()) return cmd_label(o, out);
    if (segment->parsed()) return cmd_segment(o, args, out);
    if (features->parsed()) return cmd_features(o, out);
    if (infer->parsed()) return cmd_infer(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (init->parsed()) return cmd_init_weights(o, out);
  } catch (const IoError& e) {
    err << "pitchnet: io-error: " << e.what() << '\n';
    return kDataError;
  } catch (const Error& e) {
    err << "pitchnet: data-error: " << e.what() << '\n';
    return kDataError;
  }
  err << "pitchnet: usage-error: no command\n";
  return kUsageError;
}

} // namespace pitchnet::cli
