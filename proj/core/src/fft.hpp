#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include <fftw3.h>

namespace pitchnet::detail {

/// Real-to-complex FFT of a fixed length, owning its FFTW plans and buffers.
/// Not safe for concurrent use; see thread_local_fft().
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }

  /// `in` may be shorter than size(); the remainder is zero-filled.
  /// `out` receives size()/2 + 1 bins.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);

  /// Unnormalized inverse of forward(): returns size() * x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_plan_;
  fftw_plan inverse_plan_;
};

/// Per-thread cached transform of length n.
RealFft& thread_local_fft(std::size_t n);

} // namespace pitchnet::detail
