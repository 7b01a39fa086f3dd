#pragma once

#include "omsq/kernels.hpp"
#include "omsq/psd.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace omsq {

struct WelchParams {
  std::size_t segment_len = 0;
  double overlap = 0.5;
  WindowKind window = WindowKind::hann;
};

// Half-open sample interval [begin, end).
struct SampleSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

// Periodic (DFT-even) windows.
std::vector<double> make_window(WindowKind kind, std::size_t n);

// Segment starts: each span is tiled independently with hop
// segment_len * (1 - overlap); an empty span list means the whole record.
std::vector<std::size_t> segment_starts(std::size_t n_samples, const WelchParams& params,
                                        std::span<const SampleSpan> spans);

// Averaged modified periodogram. Real input: one-sided density (doubled
// except at DC and Nyquist). Complex input: two-sided density on an
// ascending axis from -fs/2. Each segment is mean-subtracted.
// Throws NumericalError when fewer than two segments fit.
Psd welch_psd(std::span<const double> x, double sample_rate, const WelchParams& params,
              std::span<const SampleSpan> spans = {},
              kernels::Exec exec = kernels::Exec::parallel);
Psd welch_psd(std::span<const std::complex<double>> x, double sample_rate,
              const WelchParams& params, std::span<const SampleSpan> spans = {},
              kernels::Exec exec = kernels::Exec::parallel);

// Fails when rbw > min_width_hz / 5.
bool resolution_check(const Psd& psd, double min_width_hz);

// Shortest even segment giving `points_across` bins across a Lorentzian of
// full width gamma (rad/s).
std::size_t segment_len_for(double gamma, double sample_rate, double points_across = 10.0);

} // namespace omsq
