#include "omsq/spectral.hpp"

#include "omsq/errors.hpp"
#include "omsq/units.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace omsq {

std::string to_string(WindowKind w) {
  switch (w) {
  case WindowKind::hann: return "hann";
  case WindowKind::blackman: return "blackman";
  case WindowKind::rectangular: return "rectangular";
  }
  return "unknown";
}

WindowKind parse_window(std::string_view name) {
  if (name == "hann") return WindowKind::hann;
  if (name == "blackman") return WindowKind::blackman;
  if (name == "rectangular") return WindowKind::rectangular;
  throw ConfigError("unknown window '" + std::string(name) + "'");
}

double Psd::integral() const {
  return std::accumulate(density.begin(), density.end(), 0.0) * rbw;
}

std::size_t Psd::bin_of(double f_hz) const {
  if (freqs.empty()) throw std::out_of_range("empty PSD");
  auto it = std::lower_bound(freqs.begin(), freqs.end(), f_hz);
  if (it == freqs.end()) return freqs.size() - 1;
  std::size_t i = static_cast<std::size_t>(it - freqs.begin());
  if (i > 0 && std::abs(freqs[i - 1] - f_hz) <= std::abs(freqs[i] - f_hz)) --i;
  return i;
}

std::vector<double> make_window(WindowKind kind, std::size_t n) {
  std::vector<double> w(n, 1.0);
  const double step = kTwoPi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = step * static_cast<double>(i);
    switch (kind) {
    case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(a); break;
    case WindowKind::blackman: w[i] = 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a); break;
    case WindowKind::rectangular: break;
    }
  }
  return w;
}

std::vector<std::size_t> segment_starts(std::size_t n_samples, const WelchParams& params,
                                        std::span<const SampleSpan> spans) {
  const std::size_t n = params.segment_len;
  if (n < 2) throw std::invalid_argument("segment_len must be >= 2");
  if (!(params.overlap >= 0.0 && params.overlap < 1.0)) {
    throw std::invalid_argument("overlap must lie in [0, 1)");
  }
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - params.overlap))));
  std::vector<SampleSpan> tiles(spans.begin(), spans.end());
  if (tiles.empty()) tiles.push_back({0, n_samples});
  std::vector<std::size_t> starts;
  for (const SampleSpan& span : tiles) {
    const std::size_t end = std::min(span.end, n_samples);
    for (std::size_t s = span.begin; s + n <= end; s += hop) starts.push_back(s);
  }
  return starts;
}

namespace {

// |sum_n w[n] w[n - shift] e^{-2 pi i lag n / N}|^2
double overlap_power(std::span<const double> w, std::size_t shift, int lag) {
  const std::size_t n = w.size();
  std::complex<double> acc = 0.0;
  const double step = -kTwoPi * lag / static_cast<double>(n);
  const std::complex<double> rot(std::cos(step), std::sin(step));
  std::complex<double> z = std::polar(1.0, step * static_cast<double>(shift));
  for (std::size_t i = shift; i < n; ++i) {
    acc += w[i] * w[i - shift] * z;
    z *= rot;
  }
  return std::norm(acc);
}

constexpr int kCorrelationLags = 3;

// Effective averages and inter-bin correlation of the averaged periodogram
// of a locally white process, from the window and the segment layout.
void fill_statistics(Psd& psd, std::span<const double> window, std::span<const std::size_t> starts) {
  const std::size_t n = window.size();
  std::map<std::size_t, std::size_t> pair_count; // start difference -> number of pairs
  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (std::size_t j = i + 1; j < starts.size() && starts[j] - starts[i] < n; ++j) {
      ++pair_count[starts[j] - starts[i]];
    }
  }
  const double k = static_cast<double>(starts.size());
  std::vector<double> v(kCorrelationLags + 1, 0.0);
  for (int lag = 0; lag <= kCorrelationLags; ++lag) {
    double total = k * overlap_power(window, 0, lag);
    for (const auto& [shift, count] : pair_count) {
      total += 2.0 * static_cast<double>(count) * overlap_power(window, shift, lag);
    }
    v[static_cast<std::size_t>(lag)] = total;
  }
  psd.effective_averages = k * k * overlap_power(window, 0, 0) / v[0];
  psd.bin_correlation.clear();
  for (int lag = 1; lag <= kCorrelationLags; ++lag) {
    psd.bin_correlation.push_back(v[static_cast<std::size_t>(lag)] / v[0]);
  }
}

// Spectral window |W(delta)|^2 on a grid of fractional-bin offsets.
void fill_kernel(Psd& psd, WindowKind kind) {
  constexpr std::size_t kShape = 4096; // window shape resolution
  constexpr double kHalfSpan = 4.0;    // bins
  constexpr double kStep = 0.25;       // bins
  const std::vector<double> w = make_window(kind, kShape);
  psd.kernel_offsets.clear();
  psd.kernel_weights.clear();
  const int half = static_cast<int>(kHalfSpan / kStep);
  for (int j = -half; j <= half; ++j) {
    const double delta = j * kStep;
    std::complex<double> acc = 0.0;
    const double step = -kTwoPi * delta / static_cast<double>(kShape);
    for (std::size_t i = 0; i < kShape; ++i) acc += w[i] * std::polar(1.0, step * static_cast<double>(i));
    psd.kernel_offsets.push_back(delta * psd.rbw);
    psd.kernel_weights.push_back(std::norm(acc));
  }
  const double sum = std::accumulate(psd.kernel_weights.begin(), psd.kernel_weights.end(), 0.0);
  for (double& q : psd.kernel_weights) q /= sum;
}

template <class Sample>
Psd welch_impl(std::span<const Sample> x, double sample_rate, const WelchParams& params,
               std::span<const SampleSpan> spans, kernels::Exec exec) {
  constexpr bool is_complex = !std::is_same_v<Sample, double>;
  if (!(sample_rate > 0.0)) throw std::invalid_argument("sample_rate must be positive");
  if (params.segment_len > x.size()) {
    throw NumericalError("Welch segment longer than the record (" + std::to_string(params.segment_len) +
                         " > " + std::to_string(x.size()) + ")");
  }
  const std::vector<std::size_t> starts = segment_starts(x.size(), params, spans);
  if (starts.size() < 2) {
    throw NumericalError("Welch estimate needs at least 2 segments, got " + std::to_string(starts.size()));
  }
  const std::size_t n = params.segment_len;
  const std::vector<double> window = make_window(params.window, n);
  const double u = std::inner_product(window.begin(), window.end(), window.begin(), 0.0);
  const double wsum = std::accumulate(window.begin(), window.end(), 0.0);

  const std::size_t bins = is_complex ? n : n / 2 + 1;
  std::vector<double> acc(bins);
  kernels::accumulate_periodograms(x, starts, window, acc, exec);

  Psd psd;
  psd.rbw = sample_rate / static_cast<double>(n);
  psd.enbw = sample_rate * u / (wsum * wsum);
  psd.n_averages = starts.size();
  psd.window = params.window;
  psd.one_sided = !is_complex;
  psd.sample_rate = sample_rate;
  psd.segment_len = n;

  const double scale = 1.0 / (sample_rate * u * static_cast<double>(starts.size()));
  psd.freqs.resize(bins);
  psd.density.resize(bins);
  if constexpr (is_complex) {
    const std::size_t neg = n / 2; // bins at negative frequency
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = (i + n - neg) % n;
      const double index = static_cast<double>(i) - static_cast<double>(neg);
      psd.freqs[i] = index * psd.rbw;
      psd.density[i] = acc[k] * scale;
    }
  } else {
    for (std::size_t k = 0; k < bins; ++k) {
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      psd.freqs[k] = static_cast<double>(k) * psd.rbw;
      psd.density[k] = acc[k] * scale * (edge ? 1.0 : 2.0);
    }
  }
  fill_statistics(psd, window, starts);
  fill_kernel(psd, params.window);
  return psd;
}

} // namespace

Psd welch_psd(std::span<const double> x, double sample_rate, const WelchParams& params,
              std::span<const SampleSpan> spans, kernels::Exec exec) {
  return welch_impl<double>(x, sample_rate, params, spans, exec);
}

Psd welch_psd(std::span<const std::complex<double>> x, double sample_rate,
              const WelchParams& params, std::span<const SampleSpan> spans, kernels::Exec exec) {
  return welch_impl<std::complex<double>>(x, sample_rate, params, spans, exec);
}

bool resolution_check(const Psd& psd, double min_width_hz) {
  return psd.rbw <= min_width_hz / 5.0;
}

std::size_t segment_len_for(double gamma, double sample_rate, double points_across) {
  if (!(gamma > 0.0)) throw std::invalid_argument("segment_len_for: gamma must be positive");
  const double width_hz = rad_to_hz(gamma);
  auto n = static_cast<std::size_t>(std::ceil(points_across * sample_rate / width_hz));
  if (n % 2) ++n;
  return n;
}

} // namespace omsq
