#include "omsq/fft.hpp"

#include "omsq/errors.hpp"

#include <fftw3.h>

#include <mutex>

namespace omsq::fft {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
constexpr unsigned kFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;
} // namespace

RealForward::RealForward(std::size_t n) : n_(n), plan_(nullptr) {
  std::lock_guard lock(planner_mutex());
  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, kFlags);
  fftw_free(in);
  fftw_free(out);
  if (!plan_) throw NumericalError("FFTW r2c plan creation failed");
}

RealForward::~RealForward() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void RealForward::execute(double* in, std::complex<double>* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_), in, reinterpret_cast<fftw_complex*>(out));
}

ComplexForward::ComplexForward(std::size_t n) : n_(n), plan_(nullptr) {
  std::lock_guard lock(planner_mutex());
  fftw_complex* in = fftw_alloc_complex(n);
  fftw_complex* out = fftw_alloc_complex(n);
  plan_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, kFlags);
  fftw_free(in);
  fftw_free(out);
  if (!plan_) throw NumericalError("FFTW c2c plan creation failed");
}

ComplexForward::~ComplexForward() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void ComplexForward::execute(std::complex<double>* in, std::complex<double>* out) const {
  fftw_execute_dft(static_cast<fftw_plan>(plan_), reinterpret_cast<fftw_complex*>(in),
                   reinterpret_cast<fftw_complex*>(out));
}

} // namespace omsq::fft
