#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pitchnet/dsp.hpp"

namespace pitchnet {

/// Dense float tensor in [N, C, T, F] order (batch, channel, time, spectral).
struct Tensor4 {
  std::array<std::size_t, 4> shape{};
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(std::size_t n, std::size_t c, std::size_t t, std::size_t f, float fill = 0.0f)
      : shape{n, c, t, f}, data(n * c * t * f, fill) {}

  std::size_t index(std::size_t n, std::size_t c, std::size_t t, std::size_t f) const {
    return ((n * shape[1] + c) * shape[2] + t) * shape[3] + f;
  }
  float& at(std::size_t n, std::size_t c, std::size_t t, std::size_t f) {
    return data[index(n, c, t, f)];
  }
  float at(std::size_t n, std::size_t c, std::size_t t, std::size_t f) const {
    return data[index(n, c, t, f)];
  }
  std::string shape_string() const;
};

struct Extent2 {
  std::size_t t = 1;
  std::size_t f = 1;
  bool operator==(const Extent2&) const = default;
};

struct ConvOptions {
  Extent2 stride{1, 1};
  Extent2 dilation{1, 1};
  Extent2 padding{0, 0};
  std::size_t groups = 1;
};

/// Grouped, strided, dilated 2-D cross-correlation over (T, F).
/// `kernel` has shape [C_out, C_in / groups, kT, kF]; `bias` is empty or C_out
/// long. Output extent per axis: floor((in + 2p - d(k-1) - 1) / s) + 1.
/// Throws ShapeError naming both shapes when they do not fit.
Tensor4 conv2d(const Tensor4& x, const Tensor4& kernel, std::span<const float> bias,
               const ConvOptions& options);

/// Per (instance, channel) standardization over T and F:
/// (x - mean) / (std + [std == 0]) with the population standard deviation.
Tensor4 instance_normalize(const Tensor4& x);

/// CELU with alpha = 1.
void celu_inplace(Tensor4& x);

/// Inference-mode batch norm with running statistics.
void batch_norm_inplace(Tensor4& x, std::span<const float> gamma,
                        std::span<const float> beta, std::span<const float> mean,
                        std::span<const float> var, float eps = 1e-5f);

enum class LayerKind { Bottleneck, DilationRes, Conv, FullyConnected };

std::string to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Bottleneck;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  Extent2 kernel{3, 3};
  Extent2 stride{1, 1};
  std::size_t groups = 1;
  std::vector<std::size_t> dilations;  // DilationRes only: {3, 2}
};

struct ModelConfig {
  std::vector<LayerSpec> layers;
  std::size_t input_channels = kNumChannels;
  std::size_t input_bins = 513;
  std::size_t num_classes = 128;

  /// The standard stack: seven feature stages of bottleneck and dilation
  /// residual blocks, a 1x5 convolution and a fully connected head.
  static ModelConfig standard();

  /// Spectral extent entering each layer plus the final one (size = layers + 1).
  std::vector<std::size_t> spectral_chain() const;

  /// Throws InvalidArgument when channels or groups do not chain.
  void validate() const;
};

/// Half-width, in frames, of the temporal receptive field of the stack.
std::size_t temporal_receptive_radius(const ModelConfig& config);

struct WeightTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t numel() const;
};

/// Named parameters `layer<i>.<param>`; dilation blocks nest `.a` / `.b`.
class WeightStore {
 public:
  void set(std::string name, WeightTensor tensor);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  /// Throws InvalidArgument if missing or if dims differ from `expected`.
  const WeightTensor& get(const std::string& name,
                          std::span<const std::uint32_t> expected) const;
  const std::map<std::string, WeightTensor>& tensors() const { return tensors_; }

 private:
  std::map<std::string, WeightTensor> tensors_;
};

struct ParameterSpec {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::size_t layer = 0;
};

/// Every parameter the config needs, in layer order.
std::vector<ParameterSpec> required_parameters(const ModelConfig& config);

/// Names missing from `weights` or present with the wrong shape.
std::vector<std::string> missing_parameters(const ModelConfig& config,
                                            const WeightStore& weights);

/// Deterministic initialization: uniform(+-1/sqrt(fan_in)) for kernels and
/// biases, batch-norm statistics near identity.
WeightStore random_weights(const ModelConfig& config, std::uint64_t seed);

/// "PNW1" container, tensors written in name order.
void write_weights(const WeightStore& weights, const std::filesystem::path& path);
WeightStore read_weights(const std::filesystem::path& path);

struct ParameterTable {
  struct Row {
    std::size_t layer = 0;
    LayerKind kind = LayerKind::Bottleneck;
    std::size_t count = 0;
  };
  std::vector<Row> rows;
  std::size_t total = 0;

  std::string format() const;
};

/// Trainable parameters (kernels, biases, batch-norm gamma and beta, FC).
/// Running statistics are not counted. Throws if weights are incomplete.
ParameterTable count_parameters(const ModelConfig& config, const WeightStore& weights);

/// Conv -> CELU -> BN with stride (1, 2) and "same" padding.
Tensor4 bottleneck_block(const Tensor4& x, const LayerSpec& spec,
                         const WeightStore& weights, const std::string& prefix);

/// x + [conv(d=3) -> CELU -> BN -> conv(d=2) -> CELU -> BN](x).
Tensor4 dilation_res_block(const Tensor4& x, const LayerSpec& spec,
                           const WeightStore& weights, const std::string& prefix);

/// Per-frame log-probabilities, [N, T, classes].
struct LogProbs {
  std::size_t batch = 0;
  std::size_t frames = 0;
  std::size_t classes = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t n, std::size_t t) const {
    return {data.data() + (n * frames + t) * classes, classes};
  }
};

/// Stacks feature tensors of equal length into the [N, 4, T, bins] layout.
Tensor4 to_model_input(std::span<const FeatureTensor> features);

/// Called with (layer index, output) after each layer; index -1 is the
/// normalized input.
using LayerObserver = std::function<void(int, const Tensor4&)>;

/// instance_normalize -> stack -> flatten per frame -> FC -> CELU ->
/// LogSoftmax. Throws ShapeError on a wrong input shape and InvalidArgument
/// listing missing weights.
LogProbs forward(const Tensor4& input, const ModelConfig& config,
                 const WeightStore& weights, const LayerObserver& observer = {});

/// Masked KL divergence sum_i y_i (log y_i - log_yhat_i) over frames whose
/// target has positive mass, averaged over those frames. `targets` holds
/// batch * frames * classes values. 0 when no frame is voiced.
double kl_loss(std::span<const double> targets, const LogProbs& log_yhat);

} // namespace pitchnet
