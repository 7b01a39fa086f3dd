#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>

// Data-parallel inner loops. Every kernel has a serial reference path and
// an OpenMP path. The OpenMP path works on fixed-size blocks, so its output
// does not depend on the number of threads; the serial path is the plain
// textbook loop and agrees with it to rounding.
namespace omsq::kernels {

enum class Exec { serial, parallel };

using cplx = std::complex<double>;

// Block size shared by the blocked kernels (phasor re-anchoring, noise streams).
inline constexpr std::size_t kBlock = 4096;

// Adds white Gaussian noise of standard deviation sigma. Block b draws from
// stream derive_seed(seed, {b}) in both paths, so they are bit-identical.
void add_white_noise(std::span<double> out, double sigma, std::uint64_t seed, Exec exec);

// out[n] += 2 gain [x cos(wc t + phi) + y sin(wc t + phi)] cos(wlo t + theta), t = n dt
void add_wigner_heterodyne(std::span<const double> x, std::span<const double> y, double gain,
                           double carrier, double frame_phase, double lo, double lo_phase,
                           double dt, std::span<double> out, Exec exec);

// out[n] += gain Re{stokes e^{i w_s t}} + gain Re{antistokes e^{i w_as t}}
void add_sideband_heterodyne(std::span<const cplx> stokes, std::span<const cplx> antistokes,
                             double gain, double w_stokes, double w_antistokes, double dt,
                             std::span<double> out, Exec exec);

// out[n] += amplitude cos(w t)
void add_tone(double amplitude, double w, double dt, std::span<double> out, Exec exec);

// Lock-in front end: u_i = 2 x cos(wc t + theta), u_q = 2 x sin(wc t + theta),
// filtered by the FIR `taps` and decimated by `decimation`, valid part only:
// out[m] = sum_k taps[k] u[m D + k], m < (N - L) / D + 1.
void mix_and_decimate(std::span<const double> x, double carrier, double phase, double dt,
                      std::span<const double> taps, std::size_t decimation,
                      std::span<double> out_i, std::span<double> out_q, Exec exec);

std::size_t decimated_length(std::size_t n, std::size_t taps, std::size_t decimation);

// Sum over segments of |FFT(window * (x[start..start+N) - mean))|^2.
// `acc` has N/2+1 bins for real input and N bins for complex input.
void accumulate_periodograms(std::span<const double> x, std::span<const std::size_t> starts,
                             std::span<const double> window, std::span<double> acc, Exec exec);
void accumulate_periodograms(std::span<const cplx> x, std::span<const std::size_t> starts,
                             std::span<const double> window, std::span<double> acc, Exec exec);

} // namespace omsq::kernels
