// Slow reference implementations used only by the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pitchnet/labeler.hpp"
#include "pitchnet/model.hpp"

namespace oracle {

struct Dft {
  std::vector<double> amplitude;
  std::vector<double> phase;
};

// O(n^2) DFT in long double. Twiddles come from a table indexed by k*i mod n,
// each entry evaluated directly.
inline Dft direct_dft(std::span<const double> x) {
  const std::size_t n = x.size();
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  std::vector<long double> cs(n);
  std::vector<long double> sn(n);
  for (std::size_t j = 0; j < n; ++j) {
    cs[j] = std::cos(two_pi * static_cast<long double>(j) / n);
    sn[j] = std::sin(two_pi * static_cast<long double>(j) / n);
  }
  Dft out;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    long double re = 0.0L;
    long double im = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (k * i) % n;
      re += x[i] * cs[j];
      im -= x[i] * sn[j];
    }
    out.amplitude.push_back(static_cast<double>(std::hypot(re, im)));
    long double ph = std::atan2(im, re);
    if (ph < 0.0L) {
      ph += two_pi;
    }
    out.phase.push_back(static_cast<double>(ph));
  }
  return out;
}

inline std::vector<long double> raw_acf(std::span<const long double> a, std::size_t lags) {
  std::vector<long double> r(lags, 0.0L);
  for (std::size_t k = 0; k < lags; ++k) {
    for (std::size_t i = 0; i + k < a.size(); ++i) {
      r[k] += a[i] * a[i + k];
    }
  }
  return r;
}

// Direct-sum corrected autocorrelation of a raw frame.
inline std::vector<double> corrected_acf(std::span<const double> raw) {
  const std::size_t n = raw.size();
  const std::size_t lags = n / 2 + 1;
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  std::vector<long double> w(n);
  std::vector<long double> xw(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5L * (1.0L - std::cos(two_pi * i / n));
    xw[i] = w[i] * raw[i];
  }
  const auto rx = raw_acf(xw, lags);
  const auto rw = raw_acf(w, lags);
  std::vector<double> out(lags, 0.0);
  if (rx[0] == 0.0L) {
    return out;
  }
  for (std::size_t k = 0; k < lags; ++k) {
    const long double den = rw[k] / rw[0];
    out[k] = den < 1e-12L ? 0.0 : static_cast<double>((rx[k] / rx[0]) / den);
  }
  return out;
}

// Six nested loops with double accumulation.
inline pitchnet::Tensor4 conv2d(const pitchnet::Tensor4& x, const pitchnet::Tensor4& k,
                                std::span<const float> bias,
                                const pitchnet::ConvOptions& o) {
  const auto [n_in, c_in, t_in, f_in] = x.shape;
  const auto [c_out, c_per, kt, kf] = k.shape;
  const std::size_t g = o.groups;
  const std::size_t out_per = c_out / g;
  const auto extent = [](std::size_t in, std::size_t p, std::size_t d, std::size_t ks,
                         std::size_t s) { return (in + 2 * p - d * (ks - 1) - 1) / s + 1; };
  const std::size_t t_out = extent(t_in, o.padding.t, o.dilation.t, kt, o.stride.t);
  const std::size_t f_out = extent(f_in, o.padding.f, o.dilation.f, kf, o.stride.f);
  pitchnet::Tensor4 y(n_in, c_out, t_out, f_out);
  for (std::size_t n = 0; n < n_in; ++n) {
    for (std::size_t oc = 0; oc < c_out; ++oc) {
      const std::size_t group = oc / out_per;
      for (std::size_t ot = 0; ot < t_out; ++ot) {
        for (std::size_t of = 0; of < f_out; ++of) {
          double acc = bias.empty() ? 0.0 : bias[oc];
          for (std::size_t ic = 0; ic < c_per; ++ic) {
            for (std::size_t a = 0; a < kt; ++a) {
              for (std::size_t b = 0; b < kf; ++b) {
                const long long it = static_cast<long long>(ot * o.stride.t + a * o.dilation.t) -
                                     static_cast<long long>(o.padding.t);
                const long long jf = static_cast<long long>(of * o.stride.f + b * o.dilation.f) -
                                     static_cast<long long>(o.padding.f);
                if (it < 0 || jf < 0 || it >= static_cast<long long>(t_in) ||
                    jf >= static_cast<long long>(f_in)) {
                  continue;
                }
                acc += static_cast<double>(x.at(n, group * c_per + ic, it, jf)) *
                       k.at(oc, ic, a, b);
              }
            }
          }
          y.at(n, oc, ot, of) = static_cast<float>(acc);
        }
      }
    }
  }
  return y;
}

struct Path {
  std::vector<std::size_t> choice;
  double score = -std::numeric_limits<double>::infinity();
};

// True when `a` precedes `b` comparing from the last frame backwards.
inline bool reverse_lex_less(const std::vector<std::size_t>& a,
                             const std::vector<std::size_t>& b) {
  return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
}

// Enumerates every candidate path. Scores accumulate left to right in the
// same order as the dynamic program, so equal paths compare exactly.
inline Path exhaustive_path(std::span<const std::vector<pitchnet::PitchCandidate>> frames,
                            const pitchnet::TrackerConfig& config) {
  Path best;
  std::vector<std::size_t> idx(frames.size(), 0);
  while (true) {
    double s = frames[0][idx[0]].strength;
    for (std::size_t t = 1; t < frames.size(); ++t) {
      s = s - pitchnet::transition_cost(frames[t - 1][idx[t - 1]], frames[t][idx[t]], config);
      s = s + frames[t][idx[t]].strength;
    }
    if (s > best.score || (s == best.score && reverse_lex_less(idx, best.choice))) {
      best.score = s;
      best.choice = idx;
    }
    std::size_t t = 0;
    while (t < frames.size() && ++idx[t] == frames[t].size()) {
      idx[t++] = 0;
    }
    if (t == frames.size()) {
      break;
    }
  }
  return best;
}

// Linear-interpolated percentile of a copy sorted here.
inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p / 100.0;
  const double lo = std::floor(h);
  const auto i = static_cast<std::size_t>(lo);
  if (i + 1 >= v.size()) {
    return v.back();
  }
  return v[i] + (h - lo) * (v[i + 1] - v[i]);
}

// One-sample Kolmogorov-Smirnov statistic against U[lo, hi].
inline double ks_uniform(std::vector<double> v, double lo, double hi) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = std::clamp((v[i] - lo) / (hi - lo), 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic critical value at alpha = 0.01.
inline double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

inline pitchnet::Tensor4 random_tensor(std::size_t n, std::size_t c, std::size_t t,
                                       std::size_t f, std::mt19937_64& gen) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  pitchnet::Tensor4 x(n, c, t, f);
  for (auto& v : x.data) {
    v = u(gen);
  }
  return x;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("pitchnet_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

} // namespace oracle
