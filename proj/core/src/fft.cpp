#include "fft.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <new>

namespace pitchnet::detail {

namespace {
// The FFTW planner is not reentrant.
std::mutex planner_mutex;
} // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  real_ = fftw_alloc_real(n);
  spec_ = fftw_alloc_complex(n / 2 + 1);
  if (real_ == nullptr || spec_ == nullptr) {
    fftw_free(real_);
    fftw_free(spec_);
    throw std::bad_alloc();
  }
  std::lock_guard lock(planner_mutex);
  const int len = static_cast<int>(n);
  forward_plan_ = fftw_plan_dft_r2c_1d(len, real_, spec_, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(len, spec_, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  {
    std::lock_guard lock(planner_mutex);
    fftw_destroy_plan(forward_plan_);
    fftw_destroy_plan(inverse_plan_);
  }
  fftw_free(real_);
  fftw_free(spec_);
}

void RealFft::forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  const std::size_t used = std::min(in.size(), n_);
  std::copy_n(in.begin(), used, real_);
  std::fill(real_ + used, real_ + n_, 0.0);
  fftw_execute(forward_plan_);
  for (std::size_t k = 0; k <= n_ / 2; ++k) {
    out[k] = {spec_[k][0], spec_[k][1]};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  for (std::size_t k = 0; k <= n_ / 2; ++k) {
    spec_[k][0] = in[k].real();
    spec_[k][1] = in[k].imag();
  }
  // c2r plans overwrite their input, which is why spec_ is refilled above.
  fftw_execute(inverse_plan_);
  std::copy_n(real_, n_, out.begin());
}

RealFft& thread_local_fft(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<RealFft>(n);
  }
  return *slot;
}

} // namespace pitchnet::detail
