#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace omsq {

enum class WindowKind { hann, blackman, rectangular };

std::string to_string(WindowKind w);
WindowKind parse_window(std::string_view name);

// Power spectral density on a frequency axis in Hz, density in units^2/Hz.
//
// Normalization contract: sum(density) * rbw equals the variance of the
// input (one-sided for real input, two-sided for complex input).
struct Psd {
  std::vector<double> freqs;
  std::vector<double> density;

  double rbw = 0.0;   // bin spacing, Hz
  double enbw = 0.0;  // equivalent noise bandwidth of the window, Hz
  std::size_t n_averages = 0;
  double effective_averages = 0.0; // accounts for segment overlap
  WindowKind window = WindowKind::hann;
  bool one_sided = true;
  double sample_rate = 0.0;
  std::size_t segment_len = 0;

  // Correlation between averaged-periodogram bins k and k+l, l = 1..L,
  // for a locally white input. Empty for analytic spectra.
  std::vector<double> bin_correlation;

  // Spectral window of the estimator as quadrature nodes (offsets in Hz)
  // and weights summing to one: E[density(f)] = sum_j w_j S(f + df_j).
  std::vector<double> kernel_offsets;
  std::vector<double> kernel_weights;

  std::size_t size() const { return freqs.size(); }
  bool is_estimate() const { return n_averages > 0; }

  // sum(density) * rbw
  double integral() const;
  // Index of the bin nearest to f.
  std::size_t bin_of(double f_hz) const;
};

} // namespace omsq
