#pragma once

#include <complex>
#include <cstddef>
#include <memory>

// Thin FFTW wrappers. Plans are built with FFTW_ESTIMATE so the algorithm
// (and therefore every output bit) is the same on every run. Plan creation
// is serialized; execution is thread-safe.
namespace omsq::fft {

class RealForward {
public:
  explicit RealForward(std::size_t n);
  ~RealForward();
  RealForward(const RealForward&) = delete;
  RealForward& operator=(const RealForward&) = delete;

  std::size_t size() const { return n_; }
  // in: n reals, out: n/2+1 bins.
  void execute(double* in, std::complex<double>* out) const;

private:
  std::size_t n_;
  void* plan_;
};

class ComplexForward {
public:
  explicit ComplexForward(std::size_t n);
  ~ComplexForward();
  ComplexForward(const ComplexForward&) = delete;
  ComplexForward& operator=(const ComplexForward&) = delete;

  std::size_t size() const { return n_; }
  void execute(std::complex<double>* in, std::complex<double>* out) const;

private:
  std::size_t n_;
  void* plan_;
};

} // namespace omsq::fft
