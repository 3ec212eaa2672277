#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "pitchnet/error.hpp"
#include "pitchnet/model.hpp"
#include "pitchnet/pitch_codec.hpp"

using namespace pitchnet;

namespace {

WeightTensor random_param(std::vector<std::uint32_t> dims, std::mt19937_64& gen, float lo,
                          float hi) {
  WeightTensor w;
  w.dims = std::move(dims);
  w.values.resize(w.numel());
  std::uniform_real_distribution<float> u(lo, hi);
  for (auto& v : w.values) {
    v = u(gen);
  }
  return w;
}

// conv + bn parameters of one stage under `prefix`.
void add_stage(WeightStore& s, const std::string& prefix, std::uint32_t out, std::uint32_t in_per,
               Extent2 k, std::mt19937_64& gen) {
  s.set(prefix + ".conv.weight",
        random_param({out, in_per, static_cast<std::uint32_t>(k.t), static_cast<std::uint32_t>(k.f)},
                     gen, -0.3f, 0.3f));
  s.set(prefix + ".conv.bias", random_param({out}, gen, -0.1f, 0.1f));
  s.set(prefix + ".bn.gamma", random_param({out}, gen, 0.8f, 1.2f));
  s.set(prefix + ".bn.beta", random_param({out}, gen, -0.1f, 0.1f));
  s.set(prefix + ".bn.mean", random_param({out}, gen, -0.1f, 0.1f));
  s.set(prefix + ".bn.var", random_param({out}, gen, 0.5f, 1.5f));
}

Tensor4 as_kernel(const WeightTensor& w) {
  Tensor4 k(w.dims[0], w.dims[1], w.dims[2], w.dims[3]);
  k.data = w.values;
  return k;
}

// Reference conv -> CELU -> BN stage built on the loop oracle.
Tensor4 ref_stage(const Tensor4& x, const WeightStore& s, const std::string& prefix,
                  const ConvOptions& o) {
  auto get = [&](const char* p) -> const WeightTensor& { return s.tensors().at(prefix + p); };
  Tensor4 y = oracle::conv2d(x, as_kernel(get(".conv.weight")), get(".conv.bias").values, o);
  const auto& g = get(".bn.gamma").values;
  const auto& b = get(".bn.beta").values;
  const auto& m = get(".bn.mean").values;
  const auto& v = get(".bn.var").values;
  for (std::size_t n = 0; n < y.shape[0]; ++n) {
    for (std::size_t c = 0; c < y.shape[1]; ++c) {
      for (std::size_t t = 0; t < y.shape[2]; ++t) {
        for (std::size_t f = 0; f < y.shape[3]; ++f) {
          double z = y.at(n, c, t, f);
          z = z > 0 ? z : std::expm1(z);
          y.at(n, c, t, f) = static_cast<float>(g[c] * (z - m[c]) / std::sqrt(v[c] + 1e-5) + b[c]);
        }
      }
    }
  }
  return y;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  EXPECT_EQ(a.shape, b.shape);
  double d = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    d = std::max(d, static_cast<double>(std::abs(a.data[i] - b.data[i])));
  }
  return d;
}

} // namespace

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 gen(1);
  const auto x = oracle::random_tensor(2, 3, 5, 7, gen);
  Tensor4 k(3, 3, 1, 1);
  for (std::size_t c = 0; c < 3; ++c) {
    k.at(c, c, 0, 0) = 1.0f;
  }
  const auto y = conv2d(x, k, {}, ConvOptions{});
  EXPECT_EQ(y.shape, x.shape);
  EXPECT_EQ(y.data, x.data);
}

TEST(Conv2d, MatchesLoopOracleOnRandomShapes) {
  std::mt19937_64 gen(2024);
  auto pick = [&](int lo, int hi) {
    return static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(gen));
  };
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t groups = pick(1, 3);
    const std::size_t cin = groups * pick(1, 3);
    const std::size_t cout = groups * pick(1, 3);
    ConvOptions o;
    o.groups = groups;
    o.stride = {pick(1, 2), pick(1, 3)};
    o.dilation = {pick(1, 3), pick(1, 2)};
    const Extent2 k{pick(1, 3), pick(1, 3)};
    o.padding = {pick(0, 2), pick(0, 2)};
    const std::size_t t = o.dilation.t * (k.t - 1) + pick(1, 4);
    const std::size_t f = o.dilation.f * (k.f - 1) + pick(1, 4);
    const auto x = oracle::random_tensor(pick(1, 2), cin, t, f, gen);
    const auto kernel = oracle::random_tensor(cout, cin / groups, k.t, k.f, gen);
    const auto bias = oracle::random_tensor(1, 1, 1, cout, gen).data;
    worst = std::max(worst, max_abs_diff(conv2d(x, kernel, bias, o),
                                         oracle::conv2d(x, kernel, bias, o)));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Conv2d, DepthwiseMatchesOracle) {
  std::mt19937_64 gen(3);
  const auto x = oracle::random_tensor(1, 4, 9, 11, gen);
  const auto kernel = oracle::random_tensor(4, 1, 3, 3, gen);
  ConvOptions o;
  o.groups = 4;
  o.padding = {1, 1};
  EXPECT_LT(max_abs_diff(conv2d(x, kernel, {}, o), oracle::conv2d(x, kernel, {}, o)), 1e-5);
}

TEST(Conv2d, ShapeErrorsNameShapes) {
  const Tensor4 x(1, 4, 5, 5);
  const Tensor4 k(4, 3, 3, 3);
  try {
    conv2d(x, k, {}, ConvOptions{});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(x.shape_string()), std::string::npos) << what;
    EXPECT_NE(what.find(k.shape_string()), std::string::npos) << what;
  }
  ConvOptions o;
  o.groups = 3;
  EXPECT_THROW(conv2d(x, Tensor4(3, 1, 1, 1), {}, o), ShapeError);
}

TEST(InstanceNorm, StandardizesEachSlice) {
  std::mt19937_64 gen(4);
  auto x = oracle::random_tensor(2, 3, 6, 10, gen);
  for (std::size_t i = 0; i < 60; ++i) {
    x.data[60 + i] = 2.5f;  // instance 0, channel 1 constant
  }
  const auto y = instance_normalize(x);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t c = 0; c < 3; ++c) {
      double sum = 0.0;
      double sq = 0.0;
      for (std::size_t i = 0; i < 60; ++i) {
        const double v = y.data[(n * 3 + c) * 60 + i];
        sum += v;
        sq += v * v;
      }
      const double mean = sum / 60.0;
      const double sd = std::sqrt(sq / 60.0 - mean * mean);
      EXPECT_NEAR(mean, 0.0, 1e-6);
      if (n == 0 && c == 1) {
        EXPECT_EQ(sq, 0.0);
      } else {
        EXPECT_NEAR(sd, 1.0, 1e-6);
      }
    }
  }
}

TEST(InstanceNorm, AffineInvariant) {
  std::mt19937_64 gen(5);
  const auto x = oracle::random_tensor(1, 2, 8, 8, gen);
  auto z = x;
  for (auto& v : z.data) {
    v = 3.0f * v + 7.0f;
  }
  EXPECT_LT(max_abs_diff(instance_normalize(x), instance_normalize(z)), 1e-5);
}

TEST(Celu, Values) {
  Tensor4 x(1, 1, 1, 3);
  x.data = {-1.0f, 0.0f, 2.0f};
  celu_inplace(x);
  EXPECT_FLOAT_EQ(x.data[0], static_cast<float>(std::expm1(-1.0)));
  EXPECT_EQ(x.data[1], 0.0f);
  EXPECT_EQ(x.data[2], 2.0f);
}

TEST(Bottleneck, SpectralArithmetic) {
  std::mt19937_64 gen(6);
  LayerSpec spec{LayerKind::Bottleneck, 4, 8, {7, 7}, {1, 2}, 1, {}};
  WeightStore s;
  add_stage(s, "L", 8, 4, spec.kernel, gen);
  const auto x = oracle::random_tensor(1, 4, 5, 513, gen);
  const auto y = bottleneck_block(x, spec, s, "L");
  EXPECT_EQ(y.shape, (std::array<std::size_t, 4>{1, 8, 5, 257}));
  ConvOptions o;
  o.stride = {1, 2};
  o.padding = {3, 3};
  EXPECT_LT(max_abs_diff(y, ref_stage(x, s, "L", o)), 1e-5);
}

TEST(Bottleneck, GroupedMatchesOracle) {
  std::mt19937_64 gen(7);
  LayerSpec spec{LayerKind::Bottleneck, 8, 8, {3, 3}, {1, 2}, 4, {}};
  WeightStore s;
  add_stage(s, "B", 8, 2, spec.kernel, gen);
  const auto x = oracle::random_tensor(2, 8, 6, 17, gen);
  ConvOptions o;
  o.stride = {1, 2};
  o.padding = {1, 1};
  o.groups = 4;
  const auto y = bottleneck_block(x, spec, s, "B");
  EXPECT_EQ(y.shape[3], 9u);
  EXPECT_LT(max_abs_diff(y, ref_stage(x, s, "B", o)), 1e-5);
}

TEST(DilationRes, ZeroWeightsIsIdentity) {
  LayerSpec spec{LayerKind::DilationRes, 8, 8, {3, 3}, {1, 1}, 4, {3, 2}};
  WeightStore s;
  for (const char* sub : {"D.a", "D.b"}) {
    const std::string p = sub;
    s.set(p + ".conv.weight", WeightTensor{{8, 2, 3, 3}, std::vector<float>(144, 0.0f)});
    s.set(p + ".conv.bias", WeightTensor{{8}, std::vector<float>(8, 0.0f)});
    s.set(p + ".bn.gamma", WeightTensor{{8}, std::vector<float>(8, 1.0f)});
    s.set(p + ".bn.beta", WeightTensor{{8}, std::vector<float>(8, 0.0f)});
    s.set(p + ".bn.mean", WeightTensor{{8}, std::vector<float>(8, 0.0f)});
    s.set(p + ".bn.var", WeightTensor{{8}, std::vector<float>(8, 1.0f - 1e-5f)});
  }
  std::mt19937_64 gen(8);
  const auto x = oracle::random_tensor(1, 8, 7, 9, gen);
  const auto y = dilation_res_block(x, spec, s, "D");
  EXPECT_EQ(y.shape, x.shape);
  EXPECT_LT(max_abs_diff(y, x), 1e-6);
}

TEST(DilationRes, MatchesOracleComposition) {
  std::mt19937_64 gen(9);
  LayerSpec spec{LayerKind::DilationRes, 8, 8, {3, 3}, {1, 1}, 4, {3, 2}};
  WeightStore s;
  add_stage(s, "D.a", 8, 2, spec.kernel, gen);
  add_stage(s, "D.b", 8, 2, spec.kernel, gen);
  for (std::size_t f : {7u, 9u, 12u}) {
    const auto x = oracle::random_tensor(1, 8, 8, f, gen);
    ConvOptions a;
    a.groups = 4;
    a.dilation = {3, 3};
    a.padding = {3, 3};
    ConvOptions b = a;
    b.dilation = {2, 2};
    b.padding = {2, 2};
    auto ref = ref_stage(ref_stage(x, s, "D.a", a), s, "D.b", b);
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
      ref.data[i] += x.data[i];
    }
    const auto y = dilation_res_block(x, spec, s, "D");
    EXPECT_EQ(y.shape, x.shape);
    EXPECT_LT(max_abs_diff(y, ref), 1e-5);
  }
}

TEST(ModelConfig, StandardStack) {
  const auto c = ModelConfig::standard();
  EXPECT_NO_THROW(c.validate());
  ASSERT_EQ(c.layers.size(), 11u);
  const auto chain = c.spectral_chain();
  const std::vector<std::size_t> expect = {513, 257, 129, 129, 65, 65, 33, 33, 17, 9, 5, 1};
  EXPECT_EQ(chain, expect);
  EXPECT_EQ(c.layers.back().in_channels, 640u);
  EXPECT_EQ(temporal_receptive_radius(c), 21u);
}

TEST(Parameters, CountsAndTable) {
  const auto c = ModelConfig::standard();
  const auto w = random_weights(c, 1);
  EXPECT_TRUE(missing_parameters(c, w).empty());
  const auto table = count_parameters(c, w);
  EXPECT_EQ(table.rows.size(), c.layers.size());
  EXPECT_EQ(table.rows[0].count, 4u * 128u * 49u + 128u + 2u * 128u);
  std::size_t sum = 0;
  for (const auto& r : table.rows) {
    sum += r.count;
  }
  EXPECT_EQ(sum, table.total);
  EXPECT_GE(table.total, 300000u);
  EXPECT_LE(table.total, 2000000u);
  EXPECT_NE(table.format().find(std::to_string(table.total)), std::string::npos);
}

TEST(Parameters, SingleConvLayer) {
  ModelConfig c;
  c.input_bins = 5;
  c.num_classes = 4;
  c.layers = {{LayerKind::Conv, 4, 4, {1, 1}, {1, 1}, 1, {}},
              {LayerKind::FullyConnected, 20, 4, {1, 1}, {1, 1}, 1, {}}};
  const auto w = random_weights(c, 2);
  const auto table = count_parameters(c, w);
  EXPECT_EQ(table.rows[0].count, 20u);
}

TEST(Weights, FileRoundTripAndMissing) {
  oracle::TempDir dir("pnw");
  const auto c = ModelConfig::standard();
  const auto w = random_weights(c, 3);
  write_weights(w, dir.path() / "w.pnw");
  const auto r = read_weights(dir.path() / "w.pnw");
  ASSERT_EQ(r.tensors().size(), w.tensors().size());
  for (const auto& [name, t] : w.tensors()) {
    ASSERT_EQ(r.tensors().at(name).dims, t.dims);
    ASSERT_EQ(r.tensors().at(name).values, t.values);
  }
  WeightStore partial;
  for (const auto& [name, t] : w.tensors()) {
    if (name != "layer4.a.bn.var") {
      partial.set(name, t);
    }
  }
  EXPECT_EQ(missing_parameters(c, partial), std::vector<std::string>{"layer4.a.bn.var"});
  EXPECT_THROW(forward(Tensor4(1, 4, 3, 513), c, partial), InvalidArgument);
  std::ofstream(dir.path() / "bad.pnw") << "PNW0";
  EXPECT_THROW(read_weights(dir.path() / "bad.pnw"), FormatError);
}

TEST(Forward, ShapeMassAndDeterminism) {
  const auto c = ModelConfig::standard();
  const auto w = random_weights(c, 4);
  std::mt19937_64 gen(10);
  const auto x = oracle::random_tensor(1, 4, 12, 513, gen);
  std::vector<std::array<std::size_t, 4>> shapes;
  const auto out = forward(x, c, w, [&](int, const Tensor4& t) { shapes.push_back(t.shape); });
  EXPECT_EQ(out.batch, 1u);
  EXPECT_EQ(out.frames, 12u);
  EXPECT_EQ(out.classes, 128u);
  for (std::size_t t = 0; t < out.frames; ++t) {
    double mass = 0.0;
    for (float v : out.row(0, t)) {
      mass += std::exp(static_cast<double>(v));
    }
    EXPECT_NEAR(mass, 1.0, 1e-5);
  }
  const auto chain = c.spectral_chain();
  ASSERT_GE(shapes.size(), 11u);
  for (std::size_t i = 0; i + 1 < c.layers.size(); ++i) {
    EXPECT_EQ(shapes[i + 1][3], chain[i + 1]) << i;
    EXPECT_EQ(shapes[i + 1][2], 12u);
  }
  EXPECT_EQ(forward(x, c, w).data, out.data);
  EXPECT_THROW(forward(Tensor4(1, 4, 5, 512), c, w), ShapeError);
}

TEST(Forward, BatchConsistent) {
  const auto c = ModelConfig::standard();
  const auto w = random_weights(c, 5);
  std::mt19937_64 gen(11);
  const auto a = oracle::random_tensor(1, 4, 6, 513, gen);
  const auto b = oracle::random_tensor(1, 4, 6, 513, gen);
  Tensor4 both(2, 4, 6, 513);
  std::copy(a.data.begin(), a.data.end(), both.data.begin());
  std::copy(b.data.begin(), b.data.end(), both.data.begin() + static_cast<long>(a.data.size()));
  const auto joint = forward(both, c, w);
  const auto ra = forward(a, c, w);
  const auto rb = forward(b, c, w);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t k = 0; k < 128; ++k) {
      ASSERT_NEAR(joint.row(0, t)[k], ra.row(0, t)[k], 1e-5);
      ASSERT_NEAR(joint.row(1, t)[k], rb.row(0, t)[k], 1e-5);
    }
  }
}

TEST(Forward, TranslationCovariantInInterior) {
  const auto c = ModelConfig::standard();
  const auto w = random_weights(c, 6);
  const std::size_t r = temporal_receptive_radius(c);
  const std::size_t frames = 2 * r + 8;
  std::mt19937_64 gen(12);
  const auto x = oracle::random_tensor(1, 4, frames, 513, gen);
  // A circular shift keeps the instance-normalization statistics unchanged.
  Tensor4 shifted(1, 4, frames, 513);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = 0; f < 513; ++f) {
        shifted.at(0, ch, t, f) = x.at(0, ch, (t + 1) % frames, f);
      }
    }
  }
  const auto a = forward(x, c, w);
  const auto b = forward(shifted, c, w);
  for (std::size_t t = r; t + r + 1 < frames; ++t) {
    for (std::size_t k = 0; k < 128; ++k) {
      ASSERT_NEAR(b.row(0, t)[k], a.row(0, t + 1)[k], 1e-4) << t;
    }
  }
}

TEST(KlLoss, ClosedForms) {
  LogProbs exact{1, 3, 128, std::vector<float>(3 * 128, -1e30f)};
  std::vector<double> y(3 * 128, 0.0);
  for (std::size_t t = 0; t < 3; ++t) {
    const std::size_t k = 40 + t;
    y[t * 128 + k] = 1.0;
    exact.data[t * 128 + k] = 0.0f;
  }
  EXPECT_EQ(kl_loss(y, exact), 0.0);

  LogProbs uniform{1, 3, 128, std::vector<float>(3 * 128, static_cast<float>(-std::log(128.0)))};
  EXPECT_NEAR(kl_loss(y, uniform), std::log(128.0), 1e-6);

  const std::vector<double> silent(3 * 128, 0.0);
  EXPECT_EQ(kl_loss(silent, uniform), 0.0);

  // A silent frame among voiced frames changes nothing.
  auto masked = y;
  std::fill(masked.begin() + 128, masked.begin() + 256, 0.0);
  EXPECT_NEAR(kl_loss(masked, uniform), std::log(128.0), 1e-6);
  EXPECT_THROW(kl_loss(std::vector<double>(5), uniform), ShapeError);
}

TEST(KlLoss, NonNegativeWithTwoPointTargets) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(30.0, 90.0);
  std::normal_distribution<float> n(0.0f, 2.0f);
  for (int trial = 0; trial < 20; ++trial) {
    LogProbs lp{1, 4, 128, std::vector<float>(4 * 128)};
    std::vector<double> y(4 * 128);
    for (std::size_t t = 0; t < 4; ++t) {
      const auto e = encode(u(gen));
      std::copy(e.begin(), e.end(), y.begin() + static_cast<long>(t * 128));
      double z = 0.0;
      for (std::size_t k = 0; k < 128; ++k) {
        lp.data[t * 128 + k] = n(gen);
        z += std::exp(static_cast<double>(lp.data[t * 128 + k]));
      }
      for (std::size_t k = 0; k < 128; ++k) {
        lp.data[t * 128 + k] -= static_cast<float>(std::log(z));
      }
    }
    ASSERT_GE(kl_loss(y, lp), 0.0);
  }
}
