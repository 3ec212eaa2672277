#include "pitchnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "pitchnet/error.hpp"

namespace pitchnet {

namespace {

constexpr float kBatchNormEps = 1e-5f;

std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t b) {
  std::ptrdiff_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) {
    --q;
  }
  return q;
}

std::size_t conv_extent(std::size_t in, std::size_t pad, std::size_t dilation,
                        std::size_t kernel, std::size_t stride) {
  const auto span = static_cast<std::ptrdiff_t>(dilation * (kernel - 1) + 1);
  const auto padded = static_cast<std::ptrdiff_t>(in + 2 * pad);
  if (padded < span) {
    return 0;
  }
  return static_cast<std::size_t>((padded - span) / static_cast<std::ptrdiff_t>(stride)) + 1;
}

// Input rows split into `stride` interleaved phases so that strided reads
// become contiguous: phase r holds elements r, r + s, r + 2s, ...
struct PhaseSplit {
  std::size_t stride = 1;
  std::size_t phase_len = 0;
  std::vector<float> data;  // [row][phase][phase_len]

  const float* phase(std::size_t row, std::size_t r) const {
    return data.data() + (row * stride + r) * phase_len;
  }
};

PhaseSplit split_phases(const Tensor4& x, std::size_t stride) {
  PhaseSplit split;
  split.stride = stride;
  const std::size_t f = x.shape[3];
  split.phase_len = (f + stride - 1) / stride;
  const std::size_t rows = x.shape[0] * x.shape[1] * x.shape[2];
  split.data.assign(rows * stride * split.phase_len, 0.0f);
  for (std::size_t row = 0; row < rows; ++row) {
    const float* src = x.data.data() + row * f;
    for (std::size_t i = 0; i < f; ++i) {
      split.data[(row * stride + i % stride) * split.phase_len + i / stride] = src[i];
    }
  }
  return split;
}

std::string param(const std::string& prefix, const char* suffix) {
  return prefix + "." + suffix;
}

std::span<const float> vec(const WeightStore& w, const std::string& name,
                           std::size_t n) {
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(n)};
  return w.get(name, dims).values;
}

Tensor4 kernel_tensor(const WeightStore& w, const std::string& name,
                      std::size_t out, std::size_t in_per_group, Extent2 k) {
  const std::uint32_t dims[] = {static_cast<std::uint32_t>(out),
                                static_cast<std::uint32_t>(in_per_group),
                                static_cast<std::uint32_t>(k.t),
                                static_cast<std::uint32_t>(k.f)};
  const auto& t = w.get(name, dims);
  Tensor4 kernel;
  kernel.shape = {out, in_per_group, k.t, k.f};
  kernel.data = t.values;
  return kernel;
}

// conv -> CELU -> BN, the unit shared by both block kinds.
Tensor4 conv_celu_bn(const Tensor4& x, const WeightStore& w, const std::string& prefix,
                     std::size_t out_channels, std::size_t groups, Extent2 kernel,
                     const ConvOptions& options) {
  const Tensor4 k = kernel_tensor(w, param(prefix, "conv.weight"), out_channels,
                                  x.shape[1] / groups, kernel);
  Tensor4 y = conv2d(x, k, vec(w, param(prefix, "conv.bias"), out_channels), options);
  celu_inplace(y);
  batch_norm_inplace(y, vec(w, param(prefix, "bn.gamma"), out_channels),
                     vec(w, param(prefix, "bn.beta"), out_channels),
                     vec(w, param(prefix, "bn.mean"), out_channels),
                     vec(w, param(prefix, "bn.var"), out_channels), kBatchNormEps);
  return y;
}

void add_conv_block_params(std::vector<ParameterSpec>& out, const std::string& prefix,
                           std::size_t layer, std::size_t in, std::size_t outc,
                           std::size_t groups, Extent2 k) {
  const auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  out.push_back({prefix + ".conv.weight", {u(outc), u(in / groups), u(k.t), u(k.f)}, layer});
  out.push_back({prefix + ".conv.bias", {u(outc)}, layer});
  for (const char* p : {".bn.gamma", ".bn.beta", ".bn.mean", ".bn.var"}) {
    out.push_back({prefix + p, {u(outc)}, layer});
  }
}

std::string layer_prefix(std::size_t i) { return "layer" + std::to_string(i); }

} // namespace

std::string Tensor4::shape_string() const {
  std::ostringstream ss;
  ss << '[' << shape[0] << ", " << shape[1] << ", " << shape[2] << ", " << shape[3] << ']';
  return ss.str();
}

Tensor4 conv2d(const Tensor4& x, const Tensor4& kernel, std::span<const float> bias,
               const ConvOptions& opt) {
  const auto [n, c_in, t_in, f_in] = x.shape;
  const auto [c_out, c_in_g, k_t, k_f] = kernel.shape;
  const std::size_t groups = opt.groups;
  auto mismatch = [&](const std::string& why) {
    return ShapeError("conv2d: " + why + " (input " + x.shape_string() + ", kernel " +
                      kernel.shape_string() + ", groups " + std::to_string(groups) + ")");
  };
  if (groups == 0 || c_in % groups != 0 || c_out % groups != 0) {
    throw mismatch("channels not divisible by groups");
  }
  if (c_in / groups != c_in_g) {
    throw mismatch("kernel input channels do not match input / groups");
  }
  if (!bias.empty() && bias.size() != c_out) {
    throw mismatch("bias length " + std::to_string(bias.size()) + " != output channels");
  }
  if (opt.stride.t == 0 || opt.stride.f == 0 || opt.dilation.t == 0 || opt.dilation.f == 0 ||
      k_t == 0 || k_f == 0) {
    throw mismatch("zero stride, dilation or kernel extent");
  }
  const std::size_t t_out = conv_extent(t_in, opt.padding.t, opt.dilation.t, k_t, opt.stride.t);
  const std::size_t f_out = conv_extent(f_in, opt.padding.f, opt.dilation.f, k_f, opt.stride.f);
  if (t_out == 0 || f_out == 0) {
    throw mismatch("kernel larger than padded input");
  }

  Tensor4 y(n, c_out, t_out, f_out);
  const std::size_t sf = opt.stride.f;
  const PhaseSplit split = split_phases(x, sf);
  const std::size_t c_out_g = c_out / groups;
  const auto pf = static_cast<std::ptrdiff_t>(opt.padding.f);
  const auto pt = static_cast<std::ptrdiff_t>(opt.padding.t);

  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oc = 0; oc < c_out; ++oc) {
      const std::size_t g = oc / c_out_g;
      const float bias_v = bias.empty() ? 0.0f : bias[oc];
      for (std::size_t ot = 0; ot < t_out; ++ot) {
        float* __restrict out_row = &y.at(b, oc, ot, 0);
        std::fill_n(out_row, f_out, bias_v);
        for (std::size_t icg = 0; icg < c_in_g; ++icg) {
          const std::size_t ic = g * c_in_g + icg;
          const float* w = &kernel.data[((oc * c_in_g + icg) * k_t) * k_f];
          for (std::size_t kt = 0; kt < k_t; ++kt) {
            const auto it = static_cast<std::ptrdiff_t>(ot * opt.stride.t + kt * opt.dilation.t) - pt;
            if (it < 0 || it >= static_cast<std::ptrdiff_t>(t_in)) {
              continue;
            }
            const std::size_t row = (b * c_in + ic) * t_in + static_cast<std::size_t>(it);
            for (std::size_t kf = 0; kf < k_f; ++kf) {
              const float wv = w[kt * k_f + kf];
              // Input index of output column j: j*sf + offset, i.e. phase
              // `r` at position j + q of the split row.
              const auto offset = static_cast<std::ptrdiff_t>(kf * opt.dilation.f) - pf;
              const auto q = floor_div(offset, static_cast<std::ptrdiff_t>(sf));
              const auto r = static_cast<std::size_t>(offset - q * static_cast<std::ptrdiff_t>(sf));
              const float* __restrict in_phase = split.phase(row, r);
              // Valid j: 0 <= j*sf + offset < f_in, equivalently
              // 0 <= j + q < number of elements in phase r.
              const auto phase_count =
                  static_cast<std::ptrdiff_t>((f_in + sf - 1 - r) / sf);
              const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, -q);
              const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(
                  static_cast<std::ptrdiff_t>(f_out), phase_count - q);
              for (std::ptrdiff_t j = j_lo; j < j_hi; ++j) {
                out_row[j] += wv * in_phase[j + q];
              }
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor4 instance_normalize(const Tensor4& x) {
  Tensor4 y = x;
  const std::size_t plane = x.shape[2] * x.shape[3];
  for (std::size_t b = 0; b < x.shape[0]; ++b) {
    for (std::size_t c = 0; c < x.shape[1]; ++c) {
      const float* src = &x.data[x.index(b, c, 0, 0)];
      float* dst = &y.data[x.index(b, c, 0, 0)];
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += src[i];
      }
      const double mean = sum / static_cast<double>(plane);
      double sq = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = src[i] - mean;
        sq += d * d;
      }
      const double sigma = std::sqrt(sq / static_cast<double>(plane));
      const double denom = sigma + (sigma == 0.0 ? 1.0 : 0.0);
      for (std::size_t i = 0; i < plane; ++i) {
        dst[i] = static_cast<float>((src[i] - mean) / denom);
      }
    }
  }
  return y;
}

void celu_inplace(Tensor4& x) {
  for (float& v : x.data) {
    if (v <= 0.0f) {
      v = std::expm1(v);
    }
  }
}

void batch_norm_inplace(Tensor4& x, std::span<const float> gamma,
                        std::span<const float> beta, std::span<const float> mean,
                        std::span<const float> var, float eps) {
  const std::size_t channels = x.shape[1];
  if (gamma.size() != channels || beta.size() != channels || mean.size() != channels ||
      var.size() != channels) {
    throw ShapeError("batch norm parameters do not match " + std::to_string(channels) +
                     " channels");
  }
  const std::size_t plane = x.shape[2] * x.shape[3];
  for (std::size_t b = 0; b < x.shape[0]; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const float scale = gamma[c] / std::sqrt(var[c] + eps);
      const float shift = beta[c] - mean[c] * scale;
      float* p = &x.data[x.index(b, c, 0, 0)];
      for (std::size_t i = 0; i < plane; ++i) {
        p[i] = p[i] * scale + shift;
      }
    }
  }
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Bottleneck:
      return "bottleneck";
    case LayerKind::DilationRes:
      return "dilation_res";
    case LayerKind::Conv:
      return "conv";
    case LayerKind::FullyConnected:
      return "fully_connected";
  }
  return "unknown";
}

ModelConfig ModelConfig::standard() {
  auto bottleneck = [](std::size_t in, std::size_t out, Extent2 k, std::size_t g) {
    return LayerSpec{LayerKind::Bottleneck, in, out, k, {1, 2}, g, {}};
  };
  auto dilation = [](std::size_t c) {
    return LayerSpec{LayerKind::DilationRes, c, c, {3, 3}, {1, 1}, 4, {3, 2}};
  };
  ModelConfig cfg;
  cfg.layers = {
      bottleneck(4, 128, {7, 7}, 1),
      bottleneck(128, 64, {3, 3}, 2),
      dilation(64),
      bottleneck(64, 64, {3, 3}, 4),
      dilation(64),
      bottleneck(64, 128, {3, 3}, 4),
      dilation(128),
      bottleneck(128, 128, {1, 3}, 1),
      bottleneck(128, 128, {1, 3}, 1),
      LayerSpec{LayerKind::Conv, 128, 128, {1, 5}, {1, 1}, 1, {}},
  };
  const std::size_t final_bins = cfg.spectral_chain().back();
  cfg.layers.push_back(LayerSpec{LayerKind::FullyConnected, 128 * final_bins, 128,
                                 {1, 1}, {1, 1}, 1, {}});
  return cfg;
}

std::vector<std::size_t> ModelConfig::spectral_chain() const {
  std::vector<std::size_t> chain{input_bins};
  std::size_t f = input_bins;
  for (const auto& layer : layers) {
    switch (layer.kind) {
      case LayerKind::Bottleneck:
        f = conv_extent(f, (layer.kernel.f - 1) / 2, 1, layer.kernel.f, layer.stride.f);
        break;
      case LayerKind::Conv:
        f = conv_extent(f, 0, 1, layer.kernel.f, layer.stride.f);
        break;
      case LayerKind::FullyConnected:
        f = 1;
        break;
      case LayerKind::DilationRes:
        break;
    }
    chain.push_back(f);
  }
  return chain;
}

void ModelConfig::validate() const {
  std::size_t channels = input_channels;
  const auto chain = spectral_chain();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    const std::size_t expected_in =
        l.kind == LayerKind::FullyConnected ? channels * chain[i] : channels;
    if (l.in_channels != expected_in) {
      throw InvalidArgument(where + ": expects " + std::to_string(l.in_channels) +
                            " inputs, previous stage yields " + std::to_string(expected_in));
    }
    if (l.groups == 0 || l.in_channels % l.groups != 0 || l.out_channels % l.groups != 0) {
      throw InvalidArgument(where + ": channels not divisible by groups");
    }
    if (l.kind == LayerKind::DilationRes &&
        (l.in_channels != l.out_channels || l.dilations.size() != 2)) {
      throw InvalidArgument(where + ": residual block needs equal channels and two dilations");
    }
    if (chain[i + 1] == 0) {
      throw InvalidArgument(where + ": spectral extent collapses to zero");
    }
    channels = l.out_channels;
  }
  if (layers.empty() || layers.back().kind != LayerKind::FullyConnected ||
      layers.back().out_channels != num_classes) {
    throw InvalidArgument("model must end in a fully connected layer with " +
                          std::to_string(num_classes) + " outputs");
  }
}

std::size_t temporal_receptive_radius(const ModelConfig& config) {
  std::size_t radius = 0;
  for (const auto& l : config.layers) {
    switch (l.kind) {
      case LayerKind::Bottleneck:
      case LayerKind::Conv:
        radius += (l.kernel.t - 1) / 2;
        break;
      case LayerKind::DilationRes:
        for (std::size_t d : l.dilations) {
          radius += d * ((l.kernel.t - 1) / 2);
        }
        break;
      case LayerKind::FullyConnected:
        break;
    }
  }
  return radius;
}

std::vector<ParameterSpec> required_parameters(const ModelConfig& config) {
  std::vector<ParameterSpec> out;
  const auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    const std::string prefix = layer_prefix(i);
    switch (l.kind) {
      case LayerKind::Bottleneck:
        add_conv_block_params(out, prefix, i, l.in_channels, l.out_channels, l.groups, l.kernel);
        break;
      case LayerKind::DilationRes:
        add_conv_block_params(out, prefix + ".a", i, l.in_channels, l.out_channels, l.groups,
                              l.kernel);
        add_conv_block_params(out, prefix + ".b", i, l.out_channels, l.out_channels, l.groups,
                              l.kernel);
        break;
      case LayerKind::Conv:
        out.push_back({prefix + ".conv.weight",
                       {u(l.out_channels), u(l.in_channels / l.groups), u(l.kernel.t),
                        u(l.kernel.f)},
                       i});
        out.push_back({prefix + ".conv.bias", {u(l.out_channels)}, i});
        break;
      case LayerKind::FullyConnected:
        out.push_back({prefix + ".fc.weight", {u(l.out_channels), u(l.in_channels)}, i});
        out.push_back({prefix + ".fc.bias", {u(l.out_channels)}, i});
        break;
    }
  }
  return out;
}

std::vector<std::string> missing_parameters(const ModelConfig& config,
                                            const WeightStore& weights) {
  std::vector<std::string> missing;
  for (const auto& p : required_parameters(config)) {
    const auto it = weights.tensors().find(p.name);
    if (it == weights.tensors().end() || it->second.dims != p.dims ||
        it->second.values.size() != it->second.numel()) {
      missing.push_back(p.name);
    }
  }
  return missing;
}

ParameterTable count_parameters(const ModelConfig& config, const WeightStore& weights) {
  const auto missing = missing_parameters(config, weights);
  if (!missing.empty()) {
    throw InvalidArgument("incomplete weights; first missing: " + missing.front());
  }
  ParameterTable table;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    table.rows.push_back({i, config.layers[i].kind, 0});
  }
  for (const auto& p : required_parameters(config)) {
    const bool running_stat = p.name.ends_with(".bn.mean") || p.name.ends_with(".bn.var");
    if (running_stat) {
      continue;
    }
    const std::size_t n = weights.tensors().at(p.name).numel();
    table.rows[p.layer].count += n;
    table.total += n;
  }
  return table;
}

std::string ParameterTable::format() const {
  std::ostringstream ss;
  ss << "layer  kind             params\n";
  char line[80];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%5zu  %-15s %8zu\n", r.layer, to_string(r.kind).c_str(),
                  r.count);
    ss << line;
  }
  std::snprintf(line, sizeof line, "total                  %8zu\n", total);
  ss << line;
  return ss.str();
}

Tensor4 bottleneck_block(const Tensor4& x, const LayerSpec& spec, const WeightStore& weights,
                         const std::string& prefix) {
  ConvOptions opt;
  opt.stride = spec.stride;
  opt.padding = {(spec.kernel.t - 1) / 2, (spec.kernel.f - 1) / 2};
  opt.groups = spec.groups;
  return conv_celu_bn(x, weights, prefix, spec.out_channels, spec.groups, spec.kernel, opt);
}

Tensor4 dilation_res_block(const Tensor4& x, const LayerSpec& spec, const WeightStore& weights,
                           const std::string& prefix) {
  if (x.shape[1] != spec.in_channels || spec.in_channels != spec.out_channels) {
    throw ShapeError("dilation block expects " + std::to_string(spec.in_channels) +
                     " channels in and out, input is " + x.shape_string());
  }
  if (spec.dilations.size() != 2) {
    throw InvalidArgument("dilation block needs two dilation rates");
  }
  auto stage = [&](const Tensor4& in, std::size_t d, const char* sub) {
    ConvOptions opt;
    opt.dilation = {d, d};
    opt.padding = {d * (spec.kernel.t - 1) / 2, d * (spec.kernel.f - 1) / 2};
    opt.groups = spec.groups;
    return conv_celu_bn(in, weights, prefix + sub, spec.out_channels, spec.groups, spec.kernel,
                        opt);
  };
  Tensor4 y = stage(stage(x, spec.dilations[0], ".a"), spec.dilations[1], ".b");
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    y.data[i] += x.data[i];
  }
  return y;
}

Tensor4 to_model_input(std::span<const FeatureTensor> features) {
  if (features.empty()) {
    throw ShapeError("empty feature batch");
  }
  const std::size_t frames = features.front().frames;
  const std::size_t bins = features.front().bins;
  Tensor4 x(features.size(), kNumChannels, frames, bins);
  for (std::size_t b = 0; b < features.size(); ++b) {
    const auto& ft = features[b];
    if (ft.frames != frames || ft.bins != bins) {
      throw ShapeError("feature batch items differ in shape");
    }
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        const auto row = ft.row(t, static_cast<Channel>(c));
        std::copy(row.begin(), row.end(), &x.at(b, c, t, 0));
      }
    }
  }
  return x;
}

LogProbs forward(const Tensor4& input, const ModelConfig& config, const WeightStore& weights,
                 const LayerObserver& observer) {
  config.validate();
  if (input.shape[1] != config.input_channels || input.shape[3] != config.input_bins ||
      input.shape[0] == 0 || input.shape[2] == 0) {
    throw ShapeError("model expects input [N, " + std::to_string(config.input_channels) +
                     ", T, " + std::to_string(config.input_bins) + "], got " +
                     input.shape_string());
  }
  const auto missing = missing_parameters(config, weights);
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) {
      names += (names.empty() ? "" : ", ") + m;
    }
    throw InvalidArgument("missing or misshapen weights: " + names);
  }

  Tensor4 x = instance_normalize(input);
  if (observer) {
    observer(-1, x);
  }
  LogProbs out;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    const std::string prefix = layer_prefix(i);
    switch (l.kind) {
      case LayerKind::Bottleneck:
        x = bottleneck_block(x, l, weights, prefix);
        break;
      case LayerKind::DilationRes:
        x = dilation_res_block(x, l, weights, prefix);
        break;
      case LayerKind::Conv: {
        ConvOptions opt;
        opt.stride = l.stride;
        opt.groups = l.groups;
        const Tensor4 k = kernel_tensor(weights, prefix + ".conv.weight", l.out_channels,
                                        l.in_channels / l.groups, l.kernel);
        x = conv2d(x, k, vec(weights, prefix + ".conv.bias", l.out_channels), opt);
        break;
      }
      case LayerKind::FullyConnected: {
        const auto [n, c, t, f] = x.shape;
        const std::size_t in = c * f;
        const std::uint32_t wdims[] = {static_cast<std::uint32_t>(l.out_channels),
                                       static_cast<std::uint32_t>(in)};
        const auto& w = weights.get(prefix + ".fc.weight", wdims).values;
        const auto bias = vec(weights, prefix + ".fc.bias", l.out_channels);
        Tensor4 y(n, l.out_channels, t, 1);
        std::vector<float> feat(in);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t tt = 0; tt < t; ++tt) {
            for (std::size_t cc = 0; cc < c; ++cc) {
              for (std::size_t ff = 0; ff < f; ++ff) {
                feat[cc * f + ff] = x.at(b, cc, tt, ff);
              }
            }
            for (std::size_t o = 0; o < l.out_channels; ++o) {
              const float* wr = &w[o * in];
              float acc = 0.0f;
              for (std::size_t k = 0; k < in; ++k) {
                acc += wr[k] * feat[k];
              }
              y.at(b, o, tt, 0) = acc + bias[o];
            }
          }
        }
        celu_inplace(y);
        x = std::move(y);
        break;
      }
    }
    if (observer) {
      observer(static_cast<int>(i), x);
    }
  }

  // x is [N, classes, T, 1]; log-softmax over classes per frame.
  out.batch = x.shape[0];
  out.frames = x.shape[2];
  out.classes = x.shape[1];
  out.data.resize(out.batch * out.frames * out.classes);
  for (std::size_t b = 0; b < out.batch; ++b) {
    for (std::size_t t = 0; t < out.frames; ++t) {
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < out.classes; ++k) {
        peak = std::max(peak, static_cast<double>(x.at(b, k, t, 0)));
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < out.classes; ++k) {
        sum += std::exp(x.at(b, k, t, 0) - peak);
      }
      const double log_z = peak + std::log(sum);
      float* row = &out.data[(b * out.frames + t) * out.classes];
      for (std::size_t k = 0; k < out.classes; ++k) {
        row[k] = static_cast<float>(x.at(b, k, t, 0) - log_z);
      }
    }
  }
  return out;
}

double kl_loss(std::span<const double> targets, const LogProbs& log_yhat) {
  const std::size_t classes = log_yhat.classes;
  if (targets.size() != log_yhat.data.size() || classes == 0) {
    throw ShapeError("kl_loss: " + std::to_string(targets.size()) + " targets vs " +
                     std::to_string(log_yhat.data.size()) + " predictions");
  }
  const std::size_t frames = targets.size() / classes;
  double total = 0.0;
  std::size_t voiced = 0;
  for (std::size_t i = 0; i < frames; ++i) {
    const double* y = targets.data() + i * classes;
    const float* lp = log_yhat.data.data() + i * classes;
    double mass = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      mass += y[k];
    }
    if (!(mass > 0.0)) {
      continue;
    }
    ++voiced;
    for (std::size_t k = 0; k < classes; ++k) {
      if (y[k] != 0.0) {
        total += y[k] * (std::log(y[k]) - static_cast<double>(lp[k]));
      }
    }
  }
  return voiced == 0 ? 0.0 : total / static_cast<double>(voiced);
}

} // namespace pitchnet
